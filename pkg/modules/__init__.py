"""labsched - 臨床検査ラインのバッチスケジューリング コアモジュール"""

from .models import Instance, Schedule, MoveKind, SearchResult, ResultRecord
from .instance_model import generate_instance, load_instance, save_instance, example6_instance
from .schedule_decoder import decode_fabm, realize_from_assignment, validate_schedule
from .neighborhoods import apply_move, jpr_distance, theoretical_moments
from .search_engines import run_algorithm

__all__ = [
    "Instance",
    "Schedule",
    "MoveKind",
    "SearchResult",
    "ResultRecord",
    "generate_instance",
    "load_instance",
    "save_instance",
    "example6_instance",
    "decode_fabm",
    "realize_from_assignment",
    "validate_schedule",
    "apply_move",
    "jpr_distance",
    "theoretical_moments",
    "run_algorithm",
]
