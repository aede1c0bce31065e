from .trainer import (
    train_student,
    train_teacher
)
