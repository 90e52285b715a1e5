"""Small builders shared by the test modules."""

from core_model import ComplexPower, DemandPreference, Elasticity, Instance, User
from generators import GeneratorConfig, generate_instance


def cp(z) -> ComplexPower:
    if isinstance(z, ComplexPower):
        return z
    z = complex(z)
    return ComplexPower(z.real, z.imag)


def pref(pref_id, values, utility, window=None, elastic=False) -> DemandPreference:
    """values: a list with one complex per window slot, or a bare complex for slot 1."""
    if not isinstance(values, list):
        values = [values]
    values = tuple(cp(v) for v in values)
    window = tuple(window) if window is not None else tuple(range(1, len(values) + 1))
    return DemandPreference(
        pref_id, window, values, float(utility),
        Elasticity.ELASTIC if elastic else Elasticity.INELASTIC,
    )


def instance(capacities, users) -> Instance:
    """users: {user_id: [DemandPreference, ...]} in insertion order."""
    capacities = tuple(float(c) for c in capacities)
    return Instance(
        len(capacities), capacities,
        tuple(User(uid, tuple(prefs)) for uid, prefs in users.items()),
    )


def single_slot(capacity, *demands) -> Instance:
    """single_slot(C, (z, u), (z, u), ...): one user per demand, ids u1.., p1."""
    return instance([capacity], {
        f"u{k}": [pref('p1', z, u)] for k, (z, u) in enumerate(demands, start=1)
    })


def random_instance(seed, n=5, m=1, **overrides) -> Instance:
    return generate_instance(GeneratorConfig(seed=seed, n=n, m=m, **overrides))
