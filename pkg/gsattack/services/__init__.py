from .report_service import error_payload, write_dynamics_csv, write_json, write_run_config

__all__ = [
    "error_payload",
    "write_dynamics_csv",
    "write_json",
    "write_run_config",
]
