# src/bearing_pga/core/utils.py

"""Módulo de funções utilitárias para o toolkit.

Funções de apoio aos comandos: hash de artefatos, manifestos de
rastreabilidade, trava de diretório de saída e a tabela de versões do ambiente.
"""

import hashlib
import json
import os
import sys
from contextlib import contextmanager
from importlib import metadata
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Union

from bearing_pga.core.exceptions import ArtifactMissingError, ConfigError

PathLike = Union[str, Path]

TRACKED_PACKAGES = ('numpy', 'pandas', 'colorlog')


def sha256_file(path: PathLike) -> str:
    """SHA-256 do conteúdo de um arquivo, lido em blocos."""
    file_path = Path(path)
    if not file_path.is_file():
        raise ArtifactMissingError(f"Artefato não encontrado: '{path}'.")
    digest = hashlib.sha256()
    with open(file_path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def write_manifest(
    path: PathLike,
    command: str,
    config_digest: str,
    inputs: Iterable[PathLike] = (),
    outputs: Iterable[PathLike] = (),
    extra: Mapping[str, object] = None,
) -> Path:
    """Grava o manifesto JSON de um comando.

    O manifesto registra o hash da configuração e os hashes de entradas e
    saídas, permitindo rastrear qualquer relatório até a semente do dataset e
    o checkpoint que o originaram. Não contém carimbo de tempo: reexecuções
    idênticas produzem bytes idênticos.

    Args:
        path (PathLike): Caminho do manifesto a ser gravado.
        command (str): Nome do comando da CLI.
        config_digest (str): SHA-256 da configuração canônica.
        inputs (Iterable[PathLike]): Arquivos consumidos.
        outputs (Iterable[PathLike]): Arquivos produzidos.
        extra (Mapping[str, object], optional): Campos adicionais serializáveis.

    Returns:
        Path: O caminho do manifesto gravado.
    """
    manifest_path = Path(path)
    base = manifest_path.parent
    document = {
        'command': command,
        'config_sha256': config_digest,
        'inputs': {_relative(p, base): sha256_file(p) for p in inputs},
        'outputs': {_relative(p, base): sha256_file(p) for p in outputs},
    }
    if extra:
        document['extra'] = dict(extra)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write('\n')
    return manifest_path


def read_manifest(path: PathLike) -> dict:
    manifest_path = Path(path)
    if not manifest_path.is_file():
        raise ArtifactMissingError(f"Manifesto não encontrado: '{path}'.")
    with open(manifest_path, 'r', encoding='utf-8') as f:
        return json.load(f)


def _relative(path: PathLike, base: Path) -> str:
    return os.path.relpath(Path(path), base).replace(os.sep, '/')


@contextmanager
def directory_lock(directory: PathLike) -> Iterator[Path]:
    """Trava exclusiva de um diretório de saída (um comando por vez)."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    lock_path = root / '.lock'
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as e:
        raise ConfigError(f"Diretório '{root}' já está em uso por outro comando (remova '{lock_path}' se estiver órfão).") from e
    try:
        os.write(fd, str(os.getpid()).encode('ascii'))
        os.close(fd)
        yield root
    finally:
        lock_path.unlink(missing_ok=True)


def describe_environment() -> str:
    """Gera uma tabela de texto com a versão do Python e das dependências rastreadas."""
    rows = ""
    for name in TRACKED_PACKAGES:
        try:
            version = metadata.version(name)
        except metadata.PackageNotFoundError:
            version = 'N/A'
        rows += f"║ {name:<23}║ {version:>12} ║\n"

    py_version_str = ".".join(map(str, sys.version_info[:3]))
    versao_python = f"Versão do Python: {py_version_str}"

    return (
        "\n"
        "╔════════════════════════╦══════════════╗\n"
        "║       Biblioteca       ║    Versão    ║\n"
        "╠════════════════════════╬══════════════╣\n"
        f"{rows}"
        "╠════════════════════════╩══════════════╣\n"
        f"║  {versao_python:^35}  ║\n"
        "╚═══════════════════════════════════════╝"
        "\n"
    )
