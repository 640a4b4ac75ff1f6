"""Fair allocation of billboard slots among advertisers."""

from .algorithms import (AllocParams, approx_mms, greedy_alloc, random_alloc, round_robin,
                         sample_size, threshold_constant, topk_alloc)
from .influence import ExposureMatrix, build_exposure, influence, new_state
from .instances import GenParams, generate, toy_market
from .model import (Advertiser, Allocation, Billboard, BillboardSlot, Checkin, Instance,
                    validate_allocation, validate_instance)
from .settlement import check_mms_fairness, payment, settle, utility

__all__ = [
    "Advertiser", "Allocation", "AllocParams", "Billboard", "BillboardSlot", "Checkin",
    "ExposureMatrix", "GenParams", "Instance", "approx_mms", "build_exposure",
    "check_mms_fairness", "generate", "greedy_alloc", "influence", "new_state", "toy_market",
    "payment", "random_alloc", "round_robin", "sample_size", "settle", "threshold_constant",
    "topk_alloc", "utility", "validate_allocation", "validate_instance",
]
