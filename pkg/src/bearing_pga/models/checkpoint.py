"""Checkpoint de modelos em ponto flutuante (formato BPGF).

Layout (little-endian):

    4s   magic 'BPGF'
    u16  versão (1)
    u32  tamanho do descritor JSON de arquitetura, seguido dos bytes UTF-8
    u16  número de tensores
    por tensor: u8 tamanho do nome, nome ASCII, u8 ndim, ndim × u32 dimensões
    blob float32 com os tensores concatenados na ordem da tabela

Os buffers da batch-norm (médias móveis) são gravados como tensores comuns.
"""

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from bearing_pga.core.exceptions import ArtifactMissingError, ModelFormatError
from bearing_pga.core.log_configurator import IndentedLogger
from bearing_pga.models.networks import Network, build_model

CHECKPOINT_MAGIC = b'BPGF'
CHECKPOINT_VERSION = 1

logger = IndentedLogger(__name__)


def save_checkpoint(model: Network, path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    architecture = json.dumps(model.architecture(), sort_keys=True).encode('utf-8')

    header = bytearray()
    header += struct.pack('<4sHI', CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(architecture))
    header += architecture
    header += struct.pack('<H', len(state))
    for name, tensor in state.items():
        encoded = name.encode('ascii')
        header += struct.pack('<B', len(encoded)) + encoded
        header += struct.pack('<B', tensor.ndim)
        header += struct.pack(f'<{tensor.ndim}I', *tensor.shape)

    blob = b''.join(tensor.astype('<f4').tobytes() for tensor in state.values())
    target.write_bytes(bytes(header) + blob)
    logger.debug(f"Checkpoint salvo em '{target}' ({len(state)} tensores).")
    return target


def load_checkpoint(path: Union[str, Path]) -> Network:
    """
    Lê um checkpoint BPGF e reconstrói a rede.

    Raises:
        ArtifactMissingError: arquivo inexistente.
        ModelFormatError: magic, versão ou tabela de tensores inválidos.
    """
    source = Path(path)
    if not source.is_file():
        raise ArtifactMissingError(f"Checkpoint não encontrado em '{source}'.")
    payload = source.read_bytes()

    try:
        magic, version, arch_len = struct.unpack_from('<4sHI', payload, 0)
        if magic != CHECKPOINT_MAGIC:
            raise ModelFormatError(f"'{source}' não é um checkpoint BPGF (magic {magic!r}).")
        if version != CHECKPOINT_VERSION:
            raise ModelFormatError(f"Versão de checkpoint não suportada: {version}.")
        offset = struct.calcsize('<4sHI')
        architecture = json.loads(payload[offset:offset + arch_len].decode('utf-8'))
        offset += arch_len
        (count,) = struct.unpack_from('<H', payload, offset)
        offset += 2

        table = []
        for _ in range(count):
            (name_len,) = struct.unpack_from('<B', payload, offset)
            offset += 1
            name = payload[offset:offset + name_len].decode('ascii')
            offset += name_len
            (ndim,) = struct.unpack_from('<B', payload, offset)
            offset += 1
            dims = struct.unpack_from(f'<{ndim}I', payload, offset)
            offset += 4 * ndim
            table.append((name, tuple(dims)))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"Cabeçalho de checkpoint corrompido em '{source}': {e}") from e

    expected_bytes = 4 * sum(int(np.prod(dims)) for _, dims in table)
    if len(payload) - offset != expected_bytes:
        raise ModelFormatError(
            f"Blob de parâmetros com {len(payload) - offset} bytes; esperado {expected_bytes}."
        )

    state = {}
    for name, dims in table:
        size = int(np.prod(dims))
        values = np.frombuffer(payload, dtype='<f4', count=size, offset=offset)
        state[name] = values.astype(np.float64).reshape(dims)
        offset += 4 * size

    model = build_model(architecture)
    model.load_state_dict(state)
    return model
