"""
Módulo de Hardware

Ponto fixo de 16 bits, quantização pós-treino do estudante e o simulador do
acelerador, que compartilham uma única semântica inteira.
"""

from .quantize import (
    calibrate,
    export_model,
    export_rom,
    import_model,
    load_rom,
    quantize_model,
    quantized_forward
)

from .accelerator import (
    Accelerator,
    run_inference
)
