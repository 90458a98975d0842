"""
gsattack: атаки отравления структуры графа по градиентной значимости рёбер,
суррогатные модели, оценка жертвы-GCN и численная диагностика.
"""
import sys
from pathlib import Path

_ROOT = Path(__file__).resolve().parent.parent
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

__version__ = "0.1.0"
