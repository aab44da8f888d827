"""Linear sketches and sparse recovery under the Earth-Mover Distance."""
from .errors import ContractViolation
from .measure import GridMeasure, best_k_sparse, emd, emd_cdf_1d, emd_exact, read_measure, write_measure

__version__ = "0.1.0"

__all__ = ["ContractViolation", "GridMeasure", "best_k_sparse", "emd", "emd_cdf_1d", "emd_exact",
           "read_measure", "write_measure"]
