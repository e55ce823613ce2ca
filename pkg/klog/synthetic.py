"""
Benchmark sintético de predição de ligações com regra plantada.

Cada interpretação tem entidades ``left`` e ``right``, ligações aleatórias
``near_left``/``near_right`` e o alvo ``match(L, R)``. A testemunha do alvo
pode ser:

* ``color``: ``compatible(L, R) :- left(L, C), right(R, C).`` (mesma cor);
* ``venue``: ``same_venue(L, R) :- attends_left(L, V), attends_right(R, V).``,
  junção por uma terceira entidade, com o átomo intensional no próprio domínio.

Os rótulos saem do próprio motor de regras.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Set

import numpy as np

from klog.errors import ConfigError
from klog.rules import Atom, evaluate_intensional, sorted_atoms
from klog.schema import parse_domain

logger = logging.getLogger(__name__)

COLORS = ("red", "green", "blue")
WITNESSES = ("color", "venue")

DOMAIN = """\
begin_domain.
signature left(l::self, color::property)::extensional.
signature right(r::self, color::property)::extensional.
signature near_left(a@near::left, b@near::left)::extensional.
signature near_right(a@near::right, b@near::right)::extensional.
signature match(l::left, r::right)::extensional.
end_domain.
"""

VENUE_DOMAIN = """\
begin_domain.
signature left(l::self)::extensional.
signature right(r::self)::extensional.
signature venue(v::self)::extensional.
signature near_left(a@near::left, b@near::left)::extensional.
signature near_right(a@near::right, b@near::right)::extensional.
signature attends_left(l::left, v::venue)::extensional.
signature attends_right(r::right, v::venue)::extensional.
signature same_venue(l::left, r::right)::intensional.
same_venue(L, R) :- attends_left(L, V), attends_right(R, V).
signature match(l::left, r::right)::extensional.
end_domain.
"""

_COLOR_ORACLE = """\
signature left(l::self, color::property)::extensional.
signature right(r::self, color::property)::extensional.
signature compatible(l::left, r::right)::intensional.
compatible(L, R) :- left(L, C), right(R, C).
"""

# testemunha -> (domínio gravado, programa oráculo, predicado da testemunha)
_VARIANTS = {
    "color": (DOMAIN, _COLOR_ORACLE, "compatible"),
    "venue": (VENUE_DOMAIN, VENUE_DOMAIN, "same_venue"),
}


@dataclass(frozen=True)
class SyntheticBenchmark:
    domain: str
    facts: str
    labels: Dict[str, Set[Atom]]

    @property
    def ids(self) -> List[str]:
        return list(self.labels)


def _random_links(rng: np.random.Generator, predicate: str, ids: List[str], count: int) -> Set[Atom]:
    links: Set[Atom] = set()
    for _ in range(count):
        a, b = rng.choice(len(ids), size=2, replace=False)
        links.add(Atom(predicate, (ids[a], ids[b])))
    return links


def _interpretation(rng: np.random.Generator, index: int, entities: int, witness: str) -> Set[Atom]:
    lefts = [f"l{index}_{i}" for i in range(entities)]
    rights = [f"r{index}_{i}" for i in range(entities)]
    atoms: Set[Atom] = set()
    if witness == "color":
        atoms |= {Atom("left", (l, COLORS[rng.integers(len(COLORS))])) for l in lefts}
        atoms |= {Atom("right", (r, COLORS[rng.integers(len(COLORS))])) for r in rights}
    else:
        venues = [f"v{index}_{k}" for k in range(len(COLORS))]
        atoms |= {Atom("venue", (v,)) for v in venues}
        atoms |= {Atom("left", (l,)) for l in lefts} | {Atom("right", (r,)) for r in rights}
        atoms |= {Atom("attends_left", (l, venues[rng.integers(len(venues))])) for l in lefts}
        atoms |= {Atom("attends_right", (r, venues[rng.integers(len(venues))])) for r in rights}
    atoms |= _random_links(rng, "near_left", lefts, entities)
    atoms |= _random_links(rng, "near_right", rights, entities)
    return atoms


def planted_link_dataset(n_interpretations: int = 50, seed: int = 0, entities: int = 4,
                         witness: str = "color") -> SyntheticBenchmark:
    """Domínio, fatos e rótulos verdadeiros de ``n_interpretations`` interpretações."""
    if witness not in _VARIANTS:
        raise ConfigError(f"testemunha desconhecida: {witness} (use {' | '.join(WITNESSES)})")
    domain, oracle_text, witness_predicate = _VARIANTS[witness]
    oracle = parse_domain(oracle_text)
    rng = np.random.default_rng(seed)
    blocks: List[str] = []
    labels: Dict[str, Set[Atom]] = {}
    for index in range(n_interpretations):
        atoms = _interpretation(rng, index, entities, witness)
        derived = evaluate_intensional(oracle, atoms)
        matches = {Atom("match", a.args) for a in derived if a.predicate == witness_predicate}
        interp_id = f"i{index}"
        labels[interp_id] = matches
        lines = [f"interpretation {interp_id}."] + [f"{atom}." for atom in sorted_atoms(atoms | matches)]
        blocks.append("\n".join(lines))
    positives = sum(len(m) for m in labels.values())
    logger.info("benchmark sintético (%s): %d interpretações, %d ligações positivas",
                witness, n_interpretations, positives)
    return SyntheticBenchmark(domain, "\n\n".join(blocks) + "\n", labels)
