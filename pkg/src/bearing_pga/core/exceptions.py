"""Hierarquia de exceções do toolkit.

Todas as exceções herdam de `BearingPgaError` e também de `ValueError`, de modo
que quem chama pode tratar tanto o erro específico quanto o erro de contrato
genérico do Python.
"""


class BearingPgaError(ValueError):
    """Raiz de todos os erros de contrato do toolkit."""


class FixedPointError(BearingPgaError):
    """Formato ou valor de ponto fixo inválido."""


class AccumulatorOverflowError(FixedPointError):
    """O acumulador largo de 48 bits estourou (alocação de formato mal dimensionada)."""


class UnrepresentableRangeError(FixedPointError):
    """A faixa de valores de uma camada não cabe em 16 bits com sinal."""


class SignalError(BearingPgaError):
    """Sinal de vibração inválido para a operação pedida."""


class DatasetFormatError(BearingPgaError):
    """Arquivo de dados (CSV de registros ou BPGS) malformado."""


class ShapeMismatchError(BearingPgaError):
    """Dimensões de tensores incompatíveis."""


class NonFiniteError(BearingPgaError):
    """NaN ou infinito encontrado no caminho de ponto flutuante."""


class ModelFormatError(BearingPgaError):
    """Checkpoint (BPGF) ou modelo quantizado (BPGQ) malformado."""


class RomFormatError(BearingPgaError):
    """Imagem de ROM com contagem de palavras ou formato hexadecimal inválido."""


class ConfigError(BearingPgaError):
    """Configuração inválida ou inconsistente."""


class ArtifactMissingError(BearingPgaError):
    """Artefato de um comando anterior não foi encontrado."""
