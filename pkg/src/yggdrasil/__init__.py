"""Dual-side deduplication: client-side deletions for privacy, cloud-side
generalized deduplication for space."""

from .analysis import (RatioReport, SymbolDistribution, UncertaintyReport, ccr_formula,
                       gcr_formula, measured_ratios, most_probable_string_score, n_preimages,
                       policy_reports, supersequence_count_oracle, ucr_formula, uncertainty)
from .client import ClientStore, LocalDeviation, get, reconstruct, upload
from .cloud import CloudStore, DedupRecord, compress, decompress, setup, tau_heuristic
from .errors import (CorruptedDeviationError, CorruptedStoreError, DuplicateIdError,
                     InstanceTooLargeError, LengthMismatchError, ParamsError, UnknownIdError,
                     VerificationError, YggdrasilError)
from .estimator import DualDeduplicator
from .metrics import (ChangeValue, EditScript, Swap, apply_script, damerau_levenshtein,
                      hamming, invert_script, swap_distance, swap_distance_exact, swap_script)
from .policy import DeletionStrategy, Policy
from .symstring import Params, SymbolString, chunk, dechunk, pack, seeded_rng, unpack

__version__ = "0.1.0"

__all__ = [
    "ChangeValue", "ClientStore", "CloudStore", "CorruptedDeviationError",
    "CorruptedStoreError", "DedupRecord", "DeletionStrategy", "DualDeduplicator",
    "DuplicateIdError", "EditScript", "InstanceTooLargeError", "LengthMismatchError",
    "LocalDeviation", "Params", "ParamsError", "Policy", "RatioReport", "Swap",
    "SymbolDistribution", "SymbolString", "UncertaintyReport", "UnknownIdError",
    "VerificationError", "YggdrasilError", "apply_script", "ccr_formula", "chunk",
    "compress", "damerau_levenshtein", "dechunk", "decompress", "gcr_formula", "get",
    "hamming", "invert_script", "measured_ratios", "most_probable_string_score",
    "n_preimages", "pack", "policy_reports", "reconstruct", "seeded_rng", "setup",
    "supersequence_count_oracle", "swap_distance", "swap_distance_exact", "swap_script",
    "tau_heuristic", "ucr_formula", "uncertainty", "unpack", "upload",
]
