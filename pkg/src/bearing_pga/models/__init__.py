from .networks import (
    StudentNet,
    TeacherNet,
    forward,
    model_summary,
    predict
)

from .checkpoint import (
    load_checkpoint,
    save_checkpoint
)
