# log_configurator.py

"""
Configuração de logging do toolkit.

O console recebe registros coloridos via colorlog; opcionalmente, uma cópia
sem cores vai para um arquivo dentro do diretório de saída da execução, ao
lado dos manifestos.

Principais Funções:
-------------------
setup_custom_logging:
    Instala os handlers no logger raiz (console e, se pedido, arquivo).

IndentedLogger:
    Wrapper por módulo com indentação hierárquica e o contexto `stage`, que
    abre uma etapa, indenta o que for registrado dentro dela e informa a
    duração ao final.
"""

import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

import colorlog


LOG_LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
    'CRITICAL': logging.CRITICAL,
}

LOG_FORMAT = '%(asctime)s | %(levelname)-8s | %(name)-28s | %(message)s'
DATE_FORMAT = '%d/%m/%y | %H:%M:%S'

STAGE_COLORS = {
    'DEBUG': 'cyan',
    'INFO': 'green',
    'WARNING': 'yellow',
    'ERROR': 'red',
    'CRITICAL': 'bold_yellow,bg_black',
}

NOISY_LOGGERS = ('numexpr',)


# ==============================================================================
# SETUP GLOBAL DO LOGGER
# ==============================================================================
def _console_handler() -> logging.Handler:
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(
        f"%(log_color)s{LOG_FORMAT}", datefmt=DATE_FORMAT, log_colors=STAGE_COLORS,
    ))
    return handler


def _file_handler(path: Path) -> logging.Handler:
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, encoding='utf-8')
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    return handler


def setup_custom_logging(level: str = 'INFO', log_file: Optional[Union[str, Path]] = None) -> None:
    """
    Configura o logger raiz. Chamada pelo ponto de entrada da CLI; os módulos
    da biblioteca só emitem registros.

    Handlers anteriores são fechados e removidos, de modo que chamadas
    repetidas no mesmo processo (testes da CLI) não duplicam mensagens nem
    deixam arquivos abertos.

    :param level: Nível como string ('DEBUG', 'INFO', ...). Inválido vira 'INFO'.
    :param log_file: Caminho de um arquivo de log adicional, sem cores.
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(LOG_LEVELS.get(str(level).upper(), logging.INFO))

    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    root_logger.addHandler(_console_handler())
    if log_file is not None:
        root_logger.addHandler(_file_handler(Path(log_file)))

    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


# ==============================================================================
# CLASSE DE LOGGER CUSTOMIZADO
# ==============================================================================
class IndentedLogger:
    """
    Logger com indentação hierárquica para etapas aninhadas do pipeline
    (comando -> treino -> época, quantização -> calibração, ...).
    """

    def __init__(self, name: str, indent_char: str = "    "):
        self.logger = logging.getLogger(name)
        self.indent_level = 0
        self.indent_char = indent_char

    def _prefix(self) -> str:
        if self.indent_level == 0:
            return ""
        if self.indent_level == 1:
            return "╰> "
        return f"{self.indent_char * (self.indent_level - 2)}   ╰─> "

    def log(self, level: int, msg, *args, **kwargs):
        if self.logger.isEnabledFor(level):
            self.logger.log(level, f"{self._prefix()}{msg}", *args, **kwargs)

    def debug(self, msg, *args, **kwargs):
        self.log(logging.DEBUG, msg, *args, **kwargs)

    def info(self, msg, *args, **kwargs):
        self.log(logging.INFO, msg, *args, **kwargs)

    def warning(self, msg, *args, **kwargs):
        self.log(logging.WARNING, msg, *args, **kwargs)

    def error(self, msg, *args, **kwargs):
        self.log(logging.ERROR, msg, *args, **kwargs)

    @contextmanager
    def stage(self, msg: str, *args) -> Iterator["IndentedLogger"]:
        """
        Abre uma etapa: registra `msg`, indenta o conteúdo do bloco `with` e,
        ao sair, registra a duração em nível DEBUG. A indentação é restaurada
        mesmo em caso de exceção.
        """
        self.info(msg, *args)
        self.indent_level += 1
        start = time.perf_counter()
        try:
            yield self
        finally:
            self.debug(f"concluída em {time.perf_counter() - start:.2f} s")
            self.indent_level = max(0, self.indent_level - 1)
