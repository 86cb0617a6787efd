"""Deterministic synthetic dataset generator.

Desk-scale stand-in for real gridded surface analyses: a seasonal + diurnal
temperature field with a north-south gradient, a smooth warm bump (urban-island
analog), static terrain, and correlated companion variables. Identical
(domain, steps, stride, seed, config) always produces bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid import Dataset, GridDomain, SECONDS_PER_HOUR, VariableSpec

SEASONAL_PERIOD_H = 8760.0
DIURNAL_PERIOD_H = 24.0


@dataclass(frozen=True)
class SynthConfig:
    base_t2m_k: float = 288.0
    seasonal_amp_k: float = 10.0
    diurnal_amp_k: float = 5.0
    # Mean temperature change per degree of latitude (negative = cooler northward).
    lat_gradient_k_per_deg: float = -2.0
    bump_amp_k: float = 2.0
    noise_std_k: float = 0.8


def generate_synthetic(
    domain: GridDomain,
    n_steps: int,
    stride_hours: int,
    seed: int,
    start: str = "2022-01-01T00:00:00",
    config: SynthConfig = SynthConfig(),
) -> Dataset:
    if n_steps < 1:
        raise ValidationError("need at least one timestep")
    if stride_hours < 1:
        raise ValidationError("stride must be at least one hour")

    t0 = np.datetime64(start, "s")
    timestamps = t0 + np.arange(n_steps, dtype=np.int64) * np.timedelta64(
        stride_hours * SECONDS_PER_HOUR, "s"
    )
    hours = np.arange(n_steps, dtype=np.float64) * stride_hours
    coords = domain.node_coords()
    lat, lon = coords[:, 0], coords[:, 1]

    seasonal = config.seasonal_amp_k * np.sin(2.0 * np.pi * hours / SEASONAL_PERIOD_H)
    diurnal = config.diurnal_amp_k * np.sin(2.0 * np.pi * hours / DIURNAL_PERIOD_H)
    gradient = config.lat_gradient_k_per_deg * (lat - lat.mean())

    # Warm bump offset from the domain center; width a quarter of the box.
    lat_c = domain.lat_min + 0.6 * (domain.lat_max - domain.lat_min)
    lon_c = domain.lon_min + 0.4 * (domain.lon_max - domain.lon_min)
    s_lat = 0.25 * (domain.lat_max - domain.lat_min)
    s_lon = 0.25 * (domain.lon_max - domain.lon_min)
    bump = config.bump_amp_k * np.exp(
        -0.5 * (((lat - lat_c) / s_lat) ** 2 + ((lon - lon_c) / s_lon) ** 2)
    )

    # Static terrain: a ridge rising eastward plus a hill away from the bump center.
    lon_span = domain.lon_max - domain.lon_min
    hill = np.exp(-0.5 * (((lat - domain.lat_min) / s_lat) ** 2 + ((lon - lon_c) / s_lon) ** 2))
    orog = 150.0 + 60.0 * (lon - domain.lon_min) / lon_span + 90.0 * hill

    rng = np.random.default_rng(seed)
    shape = (n_steps, domain.node_count)
    # Draw order is part of the determinism contract; keep it fixed.
    noise_t2m = rng.standard_normal(shape)
    noise_d2m = rng.standard_normal(shape)
    noise_u10 = rng.standard_normal(shape)
    noise_v10 = rng.standard_normal(shape)
    noise_sp = rng.standard_normal(shape)

    t2m = (
        config.base_t2m_k
        + seasonal[:, None]
        + diurnal[:, None]
        + gradient[None, :]
        + bump[None, :]
        + config.noise_std_k * noise_t2m
    )
    d2m = (
        t2m
        - 5.0
        + 1.0 * np.sin(2.0 * np.pi * hours / DIURNAL_PERIOD_H + 1.0)[:, None]
        + 0.5 * config.noise_std_k * noise_d2m
    )
    u10 = (
        2.0 * np.sin(2.0 * np.pi * hours / 36.0)[:, None]
        + 1.0 * np.sin(2.0 * np.pi * hours / SEASONAL_PERIOD_H + 0.5)[:, None]
        + 0.6 * noise_u10
    )
    v10 = (
        1.5 * np.sin(2.0 * np.pi * hours / 30.0 + 2.0)[:, None]
        + 0.5 * np.cos(2.0 * np.pi * hours / SEASONAL_PERIOD_H)[:, None]
        + 0.6 * noise_v10
    )
    sp = (
        99000.0
        - 11.0 * (orog - orog.mean())[None, :]
        + 250.0 * np.sin(2.0 * np.pi * hours / 72.0)[:, None]
        + 40.0 * noise_sp
    )

    names = ("t2m", "d2m", "u10", "v10", "sp", "orog")
    values = np.empty((n_steps, domain.node_count, len(names)), dtype=np.float64)
    values[:, :, 0] = t2m
    values[:, :, 1] = d2m
    values[:, :, 2] = u10
    values[:, :, 3] = v10
    values[:, :, 4] = sp
    values[:, :, 5] = orog[None, :]

    return Dataset(
        domain=domain,
        variables=tuple(VariableSpec.from_catalog(n) for n in names),
        timestamps=timestamps,
        stride_hours=stride_hours,
        values=values,
        missing_mask=np.zeros(values.shape, dtype=bool),
    )
