import numpy as np
import pytest

from slgp import Dataset, DomainSpec, KernelSpec, build_basis, build_grid
from slgp.density import sample_slice, slogt_values


@pytest.fixture
def unit_domain():
    return DomainSpec.unit(1, 1)


@pytest.fixture
def fit_grid(unit_domain):
    return build_grid(unit_domain, 101)


def simulate_dataset(basis, eps, n, grid, rng, n_locations=None):
    """Draw ``n`` observations from the SLGP defined by ``(basis, eps)``.

    Locations are uniform on ``D``; with ``n_locations`` they are drawn from
    that many distinct sites.
    """
    dom = basis.domain
    lo = np.array([b[0] for b in dom.bounds_D])
    hi = np.array([b[1] for b in dom.bounds_D])
    if n_locations is None:
        x = lo + (hi - lo) * rng.random((n, dom.d_D))
    else:
        sites = lo + (hi - lo) * rng.random((n_locations, dom.d_D))
        x = sites[rng.integers(0, n_locations, n)]
    dens = slogt_values(basis, eps, x, grid)
    t = np.array([sample_slice(d, grid, 1, rng)[0] for d in dens])
    return Dataset(x, t, dom)


@pytest.fixture
def small_problem(unit_domain, fit_grid):
    rng = np.random.default_rng(123)
    spec = KernelSpec.matern(2.5, 1.0, [0.3, 0.3])
    basis = build_basis(spec, unit_domain, 20, seed=5)
    truth = rng.standard_normal(basis.n_features)
    ds = simulate_dataset(basis, truth, 50, fit_grid, rng)
    return basis, truth, ds


TEMPERATURE_HEADER = ["Station", "Date", "Daily average temperature", "Altitude", "Longitude", "Latitude"]


def write_station_csv(path, n_stations=29, n_days=20, seed=0, bad_lines=()):
    """Synthetic table in the Swiss daily-temperature layout.

    Temperatures follow a lapse rate in altitude plus noise. Entries of
    ``bad_lines`` are 0-based data-row indices whose temperature cell is
    replaced by a non-numeric token.
    """
    rng = np.random.default_rng(seed)
    lat = rng.uniform(45.8, 47.8, n_stations)
    lon = rng.uniform(5.9, 10.5, n_stations)
    alt = rng.uniform(200, 3000, n_stations)
    lines = [",".join(TEMPERATURE_HEADER)]
    k = 0
    for s in range(n_stations):
        for d in range(n_days):
            temp = 12.0 - 0.0065 * alt[s] + rng.normal(scale=3.0)
            cell = "n/a" if k in bad_lines else f"{temp:.1f}"
            lines.append(f"ST{s:02d},2019-01-{d + 1:02d},{cell},{alt[s]:.0f},{lon[s]:.4f},{lat[s]:.4f}")
            k += 1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
