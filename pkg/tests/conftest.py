import numpy as np
import pytest

from seqtoa import (
    AgentTruth,
    NoiseSpec,
    Scenario,
    TargetState,
    fixed_topology,
)

C = 299_792_458.0


@pytest.fixture(scope="session")
def fixed_scenario():
    return fixed_topology()


def random_scenario(
    rng: np.random.Generator,
    M: int = 10,
    sigma_tau_sq: float = 1e-3,
    sigma_s_sq_db: float = -30.0,
    slot_interval: float = 0.05,
    target_box: tuple[float, float] = (10.0, 40.0),
    moving: bool = True,
) -> Scenario:
    """Well-posed random scenario: agents on [0,50]^2, target inside the hull."""
    t = slot_interval * np.arange(M)
    agents = tuple(
        AgentTruth(
            p_m=rng.uniform(0.0, 50.0, size=2),
            T_m=rng.uniform(-10.0, 10.0) * 1e-9 * C,
            t_m=t[m],
        )
        for m in range(M)
    )
    target = TargetState(
        p=rng.uniform(*target_box, size=2),
        v=rng.uniform(-5.0, 5.0, size=2) if moving else np.zeros(2),
        T=rng.uniform(-10.0, 10.0) * 1e-9 * C,
        omega=rng.uniform(-20.0, 20.0) * 1e-6 * C if moving else 0.0,
    )
    sigma_db = rng.uniform(sigma_s_sq_db - 5.0, sigma_s_sq_db + 5.0, size=M)
    noise = NoiseSpec.from_db(10.0 * np.log10(sigma_tau_sq), sigma_db)
    return Scenario(agents=agents, target=target, noise=noise)


def random_state(rng: np.random.Generator) -> TargetState:
    return TargetState(
        p=rng.uniform(-50.0, 100.0, size=2),
        v=rng.uniform(-5.0, 5.0, size=2),
        T=rng.uniform(-10.0, 10.0) * 1e-9 * C,
        omega=rng.uniform(-20.0, 20.0) * 1e-6 * C,
    )
