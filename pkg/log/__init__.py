"""
Настройка логирования. По умолчанию логи пишутся в папку logs/ в корне проекта,
CLI перенаправляет файл в каталог запуска (run.log).
"""
import logging
import sys
from pathlib import Path
from logging.handlers import RotatingFileHandler
from typing import Optional, Union

# Папка для лог-файлов по умолчанию: корень проекта / logs
_PROJECT_ROOT = Path(__file__).resolve().parent.parent
LOGS_DIR = _PROJECT_ROOT / "logs"

# Имена лог-файлов
APP_LOG_NAME = "gsattack.log"
RUN_LOG_NAME = "run.log"

_FORMAT_FILE = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
_FORMAT_CONSOLE = "%(levelname)-8s | %(name)s | %(message)s"
_DATE_FMT = "%Y-%m-%d %H:%M:%S"

# Метка наших обработчиков: чужие (например, pytest) не мешают настройке
_MARK = "_gsattack_handler"


def _ensure_logs_dir(logs_dir: Path) -> None:
    logs_dir.mkdir(parents=True, exist_ok=True)


def setup_logging(
    level=logging.INFO,
    log_file=APP_LOG_NAME,
    logs_dir: Optional[Union[str, Path]] = None,
    max_bytes=2 * 1024 * 1024,
    backup_count=3,
    console=True,
):
    """
    Настраивает логирование: файл (по умолчанию в logs/) и опционально консоль.
    Вызывать один раз при старте CLI; повторный вызов ничего не меняет.
    """
    target_dir = Path(logs_dir) if logs_dir is not None else LOGS_DIR
    root = logging.getLogger()
    if any(getattr(h, _MARK, False) for h in root.handlers):
        return
    _ensure_logs_dir(target_dir)
    log_path = target_dir / log_file
    root.setLevel(level)
    formatter_file = logging.Formatter(_FORMAT_FILE, datefmt=_DATE_FMT)
    formatter_console = logging.Formatter(_FORMAT_CONSOLE, datefmt=_DATE_FMT)
    fh = RotatingFileHandler(
        log_path,
        maxBytes=max_bytes,
        backupCount=backup_count,
        encoding="utf-8",
    )
    fh.setLevel(level)
    fh.setFormatter(formatter_file)
    setattr(fh, _MARK, True)
    root.addHandler(fh)
    if console:
        ch = logging.StreamHandler(sys.stderr)
        ch.setLevel(level)
        ch.setFormatter(formatter_console)
        setattr(ch, _MARK, True)
        root.addHandler(ch)


def reset_logging() -> None:
    """Снимает и закрывает обработчики, поставленные setup_logging."""
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, _MARK, False)]:
        root.removeHandler(handler)
        handler.close()


def get_logger(name: str) -> logging.Logger:
    """Возвращает логгер с указанным именем (например, 'gsattack.attack', 'gsattack.cli')."""
    return logging.getLogger(name)
