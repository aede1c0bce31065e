"""
Módulo de Processamento

Este pacote expõe as funções de alto nível do pré-processamento de sinais e da
montagem de datasets, criando uma API unificada para o comando `gen-data`.
"""

from .signals import (
    add_noise,
    gen_synthetic,
    preprocess,
    radix2_fft,
    rfft_mag,
    sample_windows,
    zscore
)

from .datasets import (
    build_dataset,
    load_csv,
    load_dataset,
    make_splits,
    save_dataset,
    write_csv
)

from .profiling import (
    create_dataset_report,
    create_spectrum_report
)
