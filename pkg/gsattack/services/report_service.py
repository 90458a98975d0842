"""
Запись отчётов: JSON (pydantic-модели и словари), CSV динамики гомофилии,
эхо конфигурации запуска и JSON ошибок для CLI.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Union

import pandas as pd
from pydantic import BaseModel

from ..config import DYNAMICS_COLUMNS, FLOAT_FORMAT, RUN_CONFIG_FILE
from ..exceptions import GsAttackError
from ..models import DynamicsRow, RunConfig

PathLike = Union[str, Path]


def to_jsonable(data: Any) -> Any:
    if isinstance(data, BaseModel):
        return data.model_dump(mode="json")
    return data


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, ensure_ascii=False, indent=2)
        f.write("\n")
    return path


def write_run_config(config: RunConfig, out_dir: PathLike) -> Path:
    return write_json(Path(out_dir) / RUN_CONFIG_FILE, config)


def write_dynamics_csv(rows: Iterable[DynamicsRow], path: PathLike) -> Path:
    """CSV для графика динамики: iter,h_gt,h_pseudo,lower_limit,upper_limit."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.model_dump(include=set(DYNAMICS_COLUMNS)) for r in rows], columns=DYNAMICS_COLUMNS)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def error_payload(exc: BaseException) -> Dict[str, Any]:
    if isinstance(exc, GsAttackError):
        return exc.to_dict()
    return {"error": "internal_error", "message": str(exc), "details": {"type": type(exc).__name__}}


def dumps(data: Any) -> str:
    return json.dumps(to_jsonable(data), ensure_ascii=False, indent=2)
