"""
Synthetic stand-ins for the harmonized views.

Views share a low-rank latent with known canonical correlations, and the
diabetes outcome depends on the same latent, so the whole pipeline can be run
and checked without network access.
"""

from __future__ import annotations

from collections.abc import Sequence
import logging
from typing import NamedTuple

import numpy as np
import pandas as pd

from nhanes_multiview.harmonize import DEFAULT_RULES, load_rules
from nhanes_multiview.ingest import ALL_CYCLES
from nhanes_multiview.table import SEQN, ColumnTable
from nhanes_multiview.task import (
    BODY_MEASURES,
    DEMOGRAPHICS,
    LABORATORY,
    OUTCOMES,
    SMOKING,
    StudyData,
)

logger = logging.getLogger(__name__)

#: Canonical correlations of the generated view pairs.
CORRELATIONS = (0.9, 0.6, 0.3)

# Mean and spread of each laboratory variable.
_LAB_SCALES = {
    "WBC": (7.2, 2.0),
    "LYMPH_PCT": (30.0, 8.0),
    "MONO_PCT": (7.8, 2.0),
    "NEUTRO_PCT": (58.0, 9.0),
    "EOS_PCT": (2.9, 1.8),
    "BASO_PCT": (0.7, 0.3),
    "LYMPH_NO": (2.1, 0.7),
    "MONO_NO": (0.55, 0.18),
    "NEUTRO_NO": (4.3, 1.5),
    "EOS_NO": (0.2, 0.13),
    "BASO_NO": (0.04, 0.02),
    "RBC": (4.7, 0.45),
    "HEMOGLOBIN": (14.2, 1.4),
    "HEMATOCRIT": (41.8, 4.0),
    "MCV": (89.0, 5.5),
    "MCH": (30.3, 2.2),
    "MCHC": (34.0, 0.9),
    "RDW": (12.9, 1.1),
    "PLATELETS": (255.0, 65.0),
    "MPV": (8.2, 0.9),
}


class PairedViews(NamedTuple):
    """Two row-paired views generated from a shared latent."""

    #: ``n x d_x`` first view.
    X: np.ndarray
    #: ``n x d_y`` second view.
    Y: np.ndarray
    #: ``n x k`` latent behind `X`.
    latent_x: np.ndarray
    #: ``n x k`` latent behind `Y`.
    latent_y: np.ndarray


def _mixing(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Random well-conditioned invertible matrix."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * rng.uniform(0.5, 2.0, size=dim)


def _latents(
    rng: np.random.Generator, n: int, correlations: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    rho = np.asarray(correlations, dtype=float)
    latent_x = rng.standard_normal((n, len(rho)))
    noise = rng.standard_normal((n, len(rho)))
    return latent_x, rho * latent_x + np.sqrt(1 - rho**2) * noise


def _embed(rng: np.random.Generator, latent: np.ndarray, dim: int) -> np.ndarray:
    """Invertibly mix a latent with independent noise dimensions."""
    n, k = latent.shape
    full = np.hstack([latent, rng.standard_normal((n, dim - k))])
    return full @ _mixing(rng, dim)


def paired_views(
    n: int,
    correlations: Sequence[float] = CORRELATIONS,
    dx: int = 6,
    dy: int = 6,
    seed: int = 0,
) -> PairedViews:
    """
    Generate two views whose population canonical correlations are `correlations`.

    Each view is an invertible linear mix of its latent and independent noise,
    so the canonical correlations beyond ``len(correlations)`` are zero.

    Parameters
    ----------
    n : int
        Rows.
    correlations : Sequence[float]
        Canonical correlations in ``[0, 1)``, descending.
    dx, dy : int
        View widths, at least ``len(correlations)``.
    seed : int
        Random seed.

    Returns
    -------
    PairedViews
        Views and latents.

    Raises
    ------
    ValueError
        A view is narrower than the latent.
    """
    k = len(correlations)
    if min(dx, dy) < k:
        raise ValueError(f"Views need at least {k} columns, got {dx} and {dy}")
    rng = np.random.default_rng(seed)
    latent_x, latent_y = _latents(rng, n, correlations)
    return PairedViews(_embed(rng, latent_x, dx), _embed(rng, latent_y, dy), latent_x, latent_y)


def _ordinal(values: np.ndarray, low: int, high: int) -> np.ndarray:
    return np.clip(np.round(values), low, high)


def _with_missing(rng: np.random.Generator, values: np.ndarray, rate: float) -> np.ndarray:
    values = values.astype(float)
    values[rng.random(len(values)) < rate] = np.nan
    return values


def _table(columns: dict, rows: np.ndarray, provenance: np.ndarray) -> ColumnTable:
    frame = pd.DataFrame({name: np.asarray(col)[rows] for name, col in columns.items()})
    for name in frame.columns:
        if frame[name].dtype != object:
            frame[name] = frame[name].astype("float64")
    return ColumnTable(frame, key=SEQN, provenance=provenance[rows])


def synthetic_study(
    n: int = 2000,
    seed: int = 0,
    *,
    lab_fraction: float = 0.6,
    fpg_fraction: float = 0.7,
) -> StudyData:
    """
    Generate a study with every canonical view.

    The demographics and laboratory views share a three-dimensional latent with
    canonical correlations :data:`CORRELATIONS`. Waist, weight, fasting glucose
    and the diagnosis answer follow a risk score built from the same latent.

    Parameters
    ----------
    n : int
        Respondents.
    seed : int
        Random seed.
    lab_fraction : float
        Share of respondents with a blood count.
    fpg_fraction : float
        Share of respondents in the fasting subsample.

    Returns
    -------
    StudyData
        Views named and typed as in the bundled rule file.
    """
    rng = np.random.default_rng(seed)
    seqn = np.arange(1, n + 1, dtype=float)
    cycles = np.array([cycle.label for cycle in ALL_CYCLES], dtype=object)
    provenance = cycles[np.arange(n) % len(cycles)]

    latent_x, latent_y = _latents(rng, n, CORRELATIONS)
    risk = (latent_x[:, 0] + 0.5 * latent_x[:, 1]) / np.sqrt(1.25)

    def noise() -> np.ndarray:
        return rng.standard_normal(n)

    # Exactly recoverable latent, so the view pair keeps its canonical correlations.
    exact = latent_x @ _mixing(rng, 3)
    gender = rng.choice(np.array(["Male", "Female"], dtype=object), size=n)
    age = 50 + 12 * exact[:, 0]
    born = np.where(0.5 * latent_x[:, 2] + noise() > 1.0, "Other", "US").astype(object)
    education = _ordinal(3 + 0.8 * (0.5 * latent_x[:, 1] + noise()), 1, 5)
    family_income = _ordinal(6 + 2 * (0.6 * latent_x[:, 1] + noise()), 1, 11)
    marital = np.array(
        ["Married", "Widowed", "Divorced", "Separated", "Never married", "Living with partner"],
        dtype=object,
    )
    races = np.array(
        [
            "Mexican American",
            "Other Hispanic",
            "Non-Hispanic White",
            "Non-Hispanic Black",
            "Other race",
        ],
        dtype=object,
    )
    demographics = {
        SEQN: seqn,
        "EDUCATION": education,
        "AGE": age,
        "BIRTH_COUNTRY": born,
        "CITIZEN": np.where(
            (born == "Other") & (rng.random(n) < 0.5), "Not citizen", "Citizen"
        ).astype(object),
        "FAMILY_INCOME": family_income,
        "INCOME_POVERTY_RATIO": 2.5 + 1.2 * exact[:, 1],
        "GENDER": gender,
        "HH_REF_AGE": 50 + 13 * exact[:, 2],
        "HOUSEHOLD_INCOME": np.clip(family_income + rng.integers(0, 2, n), 1, 11),
        "HH_REF_BIRTH_COUNTRY": np.where(
            (born == "Other") & (rng.random(n) < 0.8), "Other", "US"
        ).astype(object),
        "HH_REF_EDUCATION": np.clip(education + rng.integers(-1, 2, n), 1, 5),
        "HH_REF_GENDER": rng.choice(np.array(["Male", "Female"], dtype=object), size=n),
        "HH_REF_MARITAL": rng.choice(marital, size=n, p=[0.5, 0.06, 0.12, 0.04, 0.18, 0.1]),
        "HOUSEHOLD_SIZE": _ordinal(3 + 1.3 * noise(), 1, 7),
        "MARITAL_STATUS": rng.choice(marital, size=n, p=[0.5, 0.06, 0.12, 0.04, 0.18, 0.1]),
        "PREGNANT": np.where(
            (gender == "Female") & (age < 45) & (rng.random(n) < 0.06), 1.0, 0.0
        ),
        "RACE": rng.choice(races, size=n, p=[0.18, 0.07, 0.45, 0.2, 0.1]),
        "MILITARY": np.where(
            (gender == "Male") & (rng.random(n) < 0.2), "Yes", "No"
        ).astype(object),
        "YEARS_IN_US": np.where(born == "Other", rng.integers(1, 10, n), 0).astype(float),
    }

    height = 170 + np.where(gender == "Male", 7.0, -7.0) + 7 * noise()
    waist = 96 + 11 * risk + 3 * noise()
    weight = 80 + 0.9 * (waist - 96) + 0.5 * (height - 170) + 6 * noise()
    systolic = 122 + 0.3 * (age - 50) + 5 * risk + 12 * noise()
    body = {
        SEQN: seqn,
        "BP_DIASTOLIC": 70 + 0.5 * (systolic - 122) + 8 * noise(),
        "BP_SYSTOLIC": systolic,
        "BMI": _with_missing(rng, weight / (height / 100) ** 2, 0.02),
        "HEIGHT": height,
        "WAIST": waist,
        "WEIGHT": weight,
    }

    lab_values = _embed(rng, latent_y, len(_LAB_SCALES))
    lab_values = (lab_values - lab_values.mean(axis=0)) / lab_values.std(axis=0)
    laboratory = {SEQN: seqn} | {
        name: mean + spread * lab_values[:, j]
        for j, (name, (mean, spread)) in enumerate(_LAB_SCALES.items())
    }

    score = risk + 0.35 * noise()
    fpg = 100 + 15 * score + 6 * noise()
    diagnosed = ((score > 1.2) & (rng.random(n) < 0.7)).astype(float)
    smoker = (rng.random(n) < 0.4).astype(float)
    cigs = np.where(smoker == 1, _ordinal(12 + 6 * noise(), 1, 40), 0.0)
    outcomes = {
        SEQN: seqn,
        "DIAGNOSED": _with_missing(rng, diagnosed, 0.01),
        "FPG": np.where(rng.random(n) < fpg_fraction, fpg, np.nan),
        "FAMILY_HISTORY": (0.8 * risk + noise() > 0.8).astype(float),
        "HYPERTENSION": ((systolic > 135) | (rng.random(n) < 0.1)).astype(float),
        "DRINKS_PER_DAY": _ordinal(1.5 + 1.2 * noise(), 0, 10),
        "SMOKER": smoker,
        "CIGS_PER_DAY": cigs,
    }

    smoking = {
        SEQN: seqn,
        "SMOKE_START_AGE": _ordinal(17 + 3 * noise(), 8, 60),
        "SMOKE_DAYS_30": rng.integers(0, 31, n).astype(float),
        "CIG_FILTER": rng.choice(
            np.array(["Filter", "Non-filter"], dtype=object), size=n, p=[0.9, 0.1]
        ),
        "CIGS_PER_DAY_30": cigs,
        "CIG_LENGTH": rng.integers(1, 5, n).astype(float),
        "CIG_NICOTINE": 0.8 + 0.3 * noise(),
        "TIME_TO_FIRST": rng.integers(1, 5, n).astype(float),
    }

    rules = load_rules(DEFAULT_RULES)
    sources = {
        DEMOGRAPHICS: (demographics, np.ones(n, dtype=bool)),
        BODY_MEASURES: (body, np.ones(n, dtype=bool)),
        LABORATORY: (laboratory, rng.random(n) < lab_fraction),
        SMOKING: (smoking, smoker == 1),
        OUTCOMES: (outcomes, np.ones(n, dtype=bool)),
    }

    views, kinds = {}, {}
    for name, (columns, rows) in sources.items():
        order = [SEQN, *(rule.target for rule in rules[name].rules)]
        views[name] = _table({col: columns[col] for col in order}, rows, provenance)
        kinds[name] = rules[name].kinds
        logger.debug("Synthetic view %s: %d rows", name, len(views[name]))

    return StudyData(views, kinds)
