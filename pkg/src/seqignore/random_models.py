"""Random models for property tests.

Each generator takes a :class:`random.Random` so runs are reproducible.
Probabilities are small-denominator rationals, and ``zero_rate`` controls
how often entries are forced to exactly zero.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Optional

from .grecursion import OutcomeFunctional
from .model import Joint, Kernel, Regime, RegimeKind, RegimeModel, Role, Variable


def random_row(rng: random.Random, size: int, zero_rate: float = 0.0) -> tuple:
    """A probability vector with entries ``a_i / sum(a)``; some ``a_i`` may be zero."""
    weights = [rng.randint(1, 6) for _ in range(size)]
    for i in range(size):
        if rng.random() < zero_rate:
            weights[i] = 0
    if not any(weights):
        weights[rng.randrange(size)] = rng.randint(1, 6)
    total = sum(weights)
    return tuple(Fraction(w, total) for w in weights)


def random_kernel(rng, child, parents, domains, zero_rate=0.0, point_rate=0.0) -> Kernel:
    size = len(domains[child])

    def row(_):
        if rng.random() < point_rate:
            hot = rng.randrange(size)
            return tuple(Fraction(int(i == hot)) for i in range(size))
        return random_row(rng, size, zero_rate)

    return Kernel.from_function(child, parents, domains, row)


def random_base(
    rng: random.Random,
    max_stages: int = 3,
    max_domain: int = 4,
    extended: bool = True,
    max_states: int = 1500,
) -> tuple:
    """Variables of a random information base, kept under ``max_states`` configurations."""
    while True:
        n = rng.randint(0, max_stages)
        variables = []
        for i in range(1, n + 2):
            final = i == n + 1
            for j in range(rng.choice((0, 1, 1, 2)) if not final else rng.choice((0, 0, 1))):
                variables.append(_var(rng, f"L{i}" + ("abc"[j] if j else ""), Role.OBSERVABLE, max_domain))
            if final:
                variables.append(_var(rng, "Y", Role.OUTCOME, max_domain))
                break
            if extended and rng.random() < 0.75:
                variables.append(_var(rng, f"U{i}", Role.UNOBSERVED, max_domain))
            variables.append(_var(rng, f"A{i}", Role.ACTION, max_domain))
        count = 1
        for v in variables:
            count *= len(v.domain)
        if count <= max_states:
            return tuple(variables)


def _var(rng, name, role, max_domain) -> Variable:
    low = 2 if role in (Role.ACTION, Role.OUTCOME) else 1
    size = rng.randint(low, max(low, max_domain))
    return Variable(name, role, tuple(str(i) for i in range(size)))


def _parents(rng, names, pool, cap=3) -> tuple:
    k = rng.randint(0, min(cap, len(pool)))
    chosen = set(rng.sample(list(pool), k))
    return tuple(n for n in names if n in chosen)


def random_model(
    rng: random.Random,
    max_stages: int = 3,
    max_domain: int = 4,
    zero_rate: float = 0.3,
    extended: Optional[bool] = None,
    shared_rate: float = 0.5,
) -> RegimeModel:
    """An arbitrary valid model with regimes ``o`` and ``s``; nothing is enforced."""
    if extended is None:
        extended = rng.random() < 0.7
    variables = random_base(rng, max_stages, max_domain, extended)
    names = [v.name for v in variables]
    domains = {v.name: v.domain for v in variables}
    o, s = {}, {}
    for i, v in enumerate(variables):
        parents = _parents(rng, names, names[:i])
        o[v.name] = random_kernel(rng, v.name, parents, domains, zero_rate, point_rate=0.1)
        if v.role is not Role.ACTION and rng.random() < shared_rate:
            s[v.name] = o[v.name]
        else:
            parents = _parents(rng, names, names[:i])
            s[v.name] = random_kernel(rng, v.name, parents, domains, zero_rate, point_rate=0.1)
    return _assemble(variables, o, s)


def _assemble(variables, o_kernels, s_kernels) -> RegimeModel:
    return RegimeModel(
        tuple(variables),
        {
            "o": Regime("o", RegimeKind.OBSERVATIONAL, o_kernels),
            "s": Regime("s", RegimeKind.INTERVENTIONAL, s_kernels),
        },
    )


def _domain_history(variables, upto: int) -> list:
    return [v.name for v in variables[:upto] if v.role is not Role.UNOBSERVED]


def stable_model(
    rng: random.Random,
    max_stages: int = 3,
    max_domain: int = 3,
    zero_rate: float = 0.3,
    o_reads_unobserved: bool = True,
    irrelevant_in_s: bool = False,
) -> RegimeModel:
    """Extended stability and a control strategy, by construction.

    Nature kernels (observables, unobserved variables, outcome) are drawn
    once and shared by both regimes; ``s``'s action kernels read only the
    decision maker's history.  With ``o_reads_unobserved=False`` the
    observational actions ignore the unobserved variables too (sequential
    randomization).  With ``irrelevant_in_s`` each observable's row may
    depend on earlier unobserved variables only at pasts that ``s`` reaches
    with probability zero.
    """
    variables = ()
    while not any(v.role is Role.UNOBSERVED for v in variables):
        variables = random_base(rng, max_stages, max_domain, extended=True, max_states=600)
    names = [v.name for v in variables]
    domains = {v.name: v.domain for v in variables}
    position = {n: i for i, n in enumerate(names)}
    o, s = {}, {}
    # s-mass of each prefix, grown as kernels are fixed
    prefix = {(): Fraction(1)}
    for i, v in enumerate(variables):
        if v.role is Role.ACTION:
            pool_o = names[:i] if o_reads_unobserved else _domain_history(variables, i)
            o[v.name] = random_kernel(rng, v.name, _parents(rng, names, pool_o), domains, zero_rate, 0.15)
            pool_s = _domain_history(variables, i)
            s[v.name] = random_kernel(rng, v.name, _parents(rng, names, pool_s), domains, zero_rate, 0.15)
        elif irrelevant_in_s and v.role in (Role.OBSERVABLE, Role.OUTCOME):
            kernel = _irrelevant_kernel(rng, v, variables[:i], domains, prefix, zero_rate)
            o[v.name] = s[v.name] = kernel
        else:
            kernel = random_kernel(rng, v.name, _parents(rng, names, names[:i]), domains, zero_rate, 0.1)
            o[v.name] = s[v.name] = kernel
        kernel = s[v.name]
        grown = {}
        for cfg, mass in prefix.items():
            row = kernel.row(tuple(cfg[position[p]] for p in kernel.parents))
            for value, p in zip(domains[v.name], row):
                if p:
                    grown[cfg + (value,)] = mass * p
        prefix = grown
    return _assemble(variables, o, s)


def _irrelevant_kernel(rng, var, earlier, domains, prefix, zero_rate) -> Kernel:
    """Rows shared across the unobserved past wherever the domain past has positive s-mass."""
    names = [v.name for v in earlier]
    hidden = [v.name for v in earlier if v.role is Role.UNOBSERVED]
    visible = [v.name for v in earlier if v.role is not Role.UNOBSERVED]
    vis_idx = [names.index(n) for n in visible]
    reached = set()
    for cfg in prefix:
        reached.add(tuple(cfg[i] for i in vis_idx))
    shared_rows = {}
    size = len(domains[var.name])
    rows = {}
    for combo in itertools.product(*(domains[n] for n in names)):
        past = tuple(combo[i] for i in vis_idx)
        if past in reached or not hidden:
            if past not in shared_rows:
                shared_rows[past] = random_row(rng, size, zero_rate)
            rows[combo] = shared_rows[past]
        else:
            rows[combo] = random_row(rng, size, zero_rate)
    return Kernel(var.name, tuple(names), rows)


def randomized_model(rng: random.Random, **kw) -> RegimeModel:
    """Extended stability, sequential randomization and a control strategy."""
    return stable_model(rng, o_reads_unobserved=False, **kw)


def irrelevant_model(rng: random.Random, **kw) -> RegimeModel:
    """Extended stability, a control strategy and sequential irrelevance under ``s``."""
    return stable_model(rng, o_reads_unobserved=True, irrelevant_in_s=True, **kw)


def random_functional(rng: random.Random, model: RegimeModel) -> OutcomeFunctional:
    outcome = next(v for v in model.variables if v.role is Role.OUTCOME)
    return OutcomeFunctional(
        {y: Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for y in outcome.domain}
    )


def random_joint(rng: random.Random, names, max_domain: int = 3, zero_rate: float = 0.3) -> Joint:
    """A joint table over ``names`` with random rational masses, some exactly zero."""
    domains = {n: tuple(str(i) for i in range(rng.randint(1, max_domain))) for n in names}
    cells = list(itertools.product(*(domains[n] for n in names)))
    weights = random_row(rng, len(cells), zero_rate)
    return Joint(tuple(names), domains, dict(zip(cells, weights)))
