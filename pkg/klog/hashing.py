"""
Hash FNV-1a de 64 bits encadeado no estilo Merkle-Damgård.

Serialização fixa (não alterar sem invalidar modelos salvos):
  - strings: bytes UTF-8, resumidos por ``fnv1a_64`` em um inteiro;
  - inteiros: 8 bytes little-endian sem sinal (negativos em complemento de dois);
  - listas: o estado começa no valor de ``seed`` (ou no offset basis) e cada
    elemento inteiro é absorvido byte a byte com a mesma regra do FNV-1a.

O resultado é estável entre execuções, processos e plataformas, ao contrário
do ``hash()`` embutido do Python.
"""

from functools import lru_cache
from typing import Iterable, Union

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK_64 = 0xFFFFFFFFFFFFFFFF

Hashable = Union[int, str]


def fnv1a_64(data: bytes, state: int = FNV_OFFSET_BASIS) -> int:
    """FNV-1a de 64 bits sobre uma sequência de bytes."""
    for byte in data:
        state ^= byte
        state = (state * FNV_PRIME) & MASK_64
    return state


@lru_cache(maxsize=65536)
def hash_label(label: str) -> int:
    """Inteiro de 64 bits para um rótulo textual."""
    return fnv1a_64(label.encode("utf-8"))


def _absorb(state: int, value: int) -> int:
    value &= MASK_64
    for _ in range(8):
        state ^= value & 0xFF
        state = (state * FNV_PRIME) & MASK_64
        value >>= 8
    return state


def chain(items: Iterable[Hashable], seed: int = FNV_OFFSET_BASIS) -> int:
    """Encadeia inteiros (ou strings, resumidas antes) em um único hash de 64 bits."""
    state = seed & MASK_64
    for item in items:
        if isinstance(item, str):
            item = hash_label(item)
        state = _absorb(state, item)
    return state


@lru_cache(maxsize=262144)
def hash_pair(first: int, second: Hashable) -> int:
    """Hash de um par pequeno; usado nas listas distância-rótulo, que se repetem muito."""
    return chain((first, second))


def fold(value: int, bits: int) -> int:
    """Reduz um hash de 64 bits ao espaço de atributos de ``bits`` bits."""
    if bits >= 64:
        return value & MASK_64
    return value & ((1 << bits) - 1)
