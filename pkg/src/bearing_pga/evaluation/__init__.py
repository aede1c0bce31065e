from .metrics import (
    EvalReport,
    f1_macro,
    precision_macro,
    recall_macro
)
