"""
Logistic adoption velocity.

V(r, tau) follows a logistic S-curve whose growth rate, inflection point and
ceiling depend on the region's metro tier. The remote-adjusted velocity
V_eff blends the residence-region velocity with the velocity of the tiers
where a major group's employers are located, weighted by the group's
telework rate.
"""

import logging
import math
import re
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .exceptions import InvariantError, NormalizationError
from .ingest import SHARE_TOLERANCE, TeleworkTable, TierShareTable

logger = logging.getLogger(__name__)

TIERS = (1, 2, 3)
QUARTER_OFFSET = 0.125

ArrayLike = Union[float, Sequence[float], np.ndarray]


class TierParams(BaseModel):
    """Logistic parameters of one metro tier."""

    model_config = ConfigDict(frozen=True)

    k: float = Field(gt=0.0)
    tau0: float
    L: float = Field(gt=0.0, le=1.0)


class RegionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    region_id: str = Field(min_length=1)
    name: str = ""
    tier: int = Field(ge=1, le=3)
    employment_thousands: float = Field(default=0.0, ge=0.0)


class VelocityMode(str, Enum):
    RESIDENCE = "residence"
    REMOTE_ADJUSTED = "remote_adjusted"

    @classmethod
    def parse(cls, value: Union[str, "VelocityMode"]) -> "VelocityMode":
        """Accept either spelling used on the command line ("remote-adjusted" or "remote_adjusted")."""
        if isinstance(value, VelocityMode):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError:
            raise InvariantError(f"Unknown velocity mode '{value}'", module="adoption")


DEFAULT_TIERS: Dict[int, TierParams] = {
    1: TierParams(k=0.85, tau0=2024.25, L=0.92),
    2: TierParams(k=0.62, tau0=2025.00, L=0.85),
    3: TierParams(k=0.48, tau0=2025.75, L=0.78),
}

DEFAULT_REGIONS = (
    RegionConfig(region_id="seattle", name="Seattle-Tacoma-Bellevue", tier=2, employment_thousands=1847),
    RegionConfig(region_id="sf_bay", name="San Francisco Bay Area", tier=1, employment_thousands=2431),
    RegionConfig(region_id="austin", name="Austin-Round Rock", tier=2, employment_thousands=1234),
    RegionConfig(region_id="new_york", name="New York-Newark", tier=3, employment_thousands=9872),
    RegionConfig(region_id="boston", name="Boston-Cambridge", tier=2, employment_thousands=2298),
)


def logistic_v(params: TierParams, tau: ArrayLike) -> Union[float, np.ndarray]:
    """
    Adoption velocity L / (1 + exp(-k (tau - tau0))).

    Args:
        params: Tier parameters
        tau: Decimal year, or an array of them

    Returns:
        float for a scalar tau, ndarray otherwise
    """
    taus = np.asarray(tau, dtype=float)
    # far before tau0 the exponent overflows and V underflows to 0.0
    with np.errstate(over="ignore"):
        value = params.L / (1.0 + np.exp(-params.k * (taus - params.tau0)))
    return float(value) if value.ndim == 0 else value


def quarter_to_decimal(year: int, quarter: int, offset: float = QUARTER_OFFSET) -> float:
    """Decimal year of quarter ``quarter`` of ``year`` (mid-quarter by default)."""
    if quarter not in (1, 2, 3, 4):
        raise InvariantError(f"Quarter must be 1..4, got {quarter}", module="adoption")
    return year + (quarter - 1) / 4 + offset


_QUARTER_RE = re.compile(r"^(\d{4})\s*[Qq]([1-4])$")


def parse_tau(value: Union[str, int, float], offset: float = QUARTER_OFFSET) -> float:
    """
    Parse a time point: "2025Q1" (mid-quarter), "2027" (start of year) or "2026.5".
    """
    if isinstance(value, (int, float)):
        tau = float(value)
    else:
        text = str(value).strip()
        match = _QUARTER_RE.match(text)
        if match:
            return quarter_to_decimal(int(match.group(1)), int(match.group(2)), offset)
        try:
            tau = float(text)
        except ValueError:
            raise InvariantError(f"Cannot parse time point '{value}'", module="adoption")
    if not math.isfinite(tau):
        raise InvariantError(f"Time point '{value}' is not a finite year", module="adoption")
    return tau


def _check_pi(pi: Sequence[float]) -> List[float]:
    values = [float(p) for p in pi]
    if len(values) != len(TIERS):
        raise NormalizationError(f"Tier-share vector needs {len(TIERS)} components, got {len(values)}")
    if any(not 0.0 <= p <= 1.0 for p in values):
        raise NormalizationError(f"Tier shares {values} outside [0, 1]")
    total = math.fsum(values)
    if abs(total - 1.0) > SHARE_TOLERANCE:
        raise NormalizationError(f"Tier shares {values} sum to {total}, not 1")
    return values


def v_eff(
    r_o: float,
    pi: Sequence[float],
    tier_params: Mapping[int, TierParams],
    home_tier: int,
    tau: float,
) -> float:
    """
    Remote-work adjusted velocity.

    Args:
        r_o: Telework proportion of the occupation group, in [0, 1]
        pi: Employer tier shares (tiers 1..3), summing to 1
        tier_params: Parameters for all three tiers
        home_tier: Tier of the residence region
        tau: Decimal year

    Returns:
        (1 - r_o) * V(home, tau) + r_o * sum_j pi_j * V(j, tau)
    """
    if not 0.0 <= r_o <= 1.0:
        raise InvariantError(f"Telework rate {r_o} outside [0, 1]", module="adoption")
    shares = _check_pi(pi)
    missing = [t for t in TIERS if t not in tier_params]
    if missing or home_tier not in TIERS:
        raise InvariantError(f"Tier parameters incomplete (missing {missing}, home tier {home_tier})", module="adoption")

    velocities = [logistic_v(tier_params[t], tau) for t in TIERS]
    employer = math.fsum(p * v for p, v in zip(shares, velocities))
    return (1.0 - r_o) * velocities[home_tier - 1] + r_o * employer


def velocity_table(tier_params: Mapping[int, TierParams], years: Iterable[float]) -> Dict[int, Dict[float, float]]:
    """V for every tier at every time point, keyed tier then tau."""
    taus = [float(y) for y in years]
    return {tier: dict(zip(taus, np.atleast_1d(logistic_v(tier_params[tier], taus)).tolist())) for tier in sorted(tier_params)}


class AdoptionModel:
    """
    Region-aware adoption velocities.

    Holds the tier parameters, the region-to-tier assignment and, for the
    remote-adjusted mode, the telework and employer tier-share tables.
    """

    def __init__(
        self,
        tiers: Optional[Mapping[int, TierParams]] = None,
        regions: Optional[Sequence[RegionConfig]] = None,
        telework: Optional[TeleworkTable] = None,
        tier_shares: Optional[TierShareTable] = None,
    ):
        """
        Initialize the model.

        Args:
            tiers: Parameters for tiers 1..3 (default: calibrated values)
            regions: Region table (default: the five calibrated metros)
            telework: Telework rates per major group (remote mode only)
            tier_shares: Employer tier shares per major group (remote mode only)
        """
        self.tiers: Dict[int, TierParams] = dict(tiers if tiers is not None else DEFAULT_TIERS)
        missing = [t for t in TIERS if t not in self.tiers]
        if missing:
            raise InvariantError(f"Missing parameters for tier(s) {missing}", module="adoption")
        region_list = list(regions if regions is not None else DEFAULT_REGIONS)
        self.regions: Dict[str, RegionConfig] = {r.region_id: r for r in region_list}
        if len(self.regions) != len(region_list):
            raise InvariantError("Region ids must be unique", module="adoption")
        self.telework = telework
        self.tier_shares = tier_shares

    @property
    def region_ids(self) -> List[str]:
        return list(self.regions)

    def region(self, region_id: str) -> RegionConfig:
        if region_id not in self.regions:
            raise InvariantError(f"Unknown region '{region_id}'", module="adoption")
        return self.regions[region_id]

    def residence_velocity(self, region_id: str, tau: float) -> float:
        return logistic_v(self.tiers[self.region(region_id).tier], tau)

    def velocity_for(
        self,
        region: RegionConfig,
        tau: float,
        major_group: Optional[str] = None,
        mode: Union[str, VelocityMode] = VelocityMode.RESIDENCE,
    ) -> float:
        """
        Velocity for a region and time point.

        In remote-adjusted mode the occupation's SOC major group selects the
        telework rate and employer tier shares.
        """
        mode = VelocityMode.parse(mode)
        if mode is VelocityMode.RESIDENCE:
            return logistic_v(self.tiers[region.tier], tau)
        if self.telework is None or self.tier_shares is None:
            raise InvariantError("Remote-adjusted velocity needs telework and tier-share tables", module="adoption")
        if major_group is None:
            raise InvariantError("Remote-adjusted velocity needs the occupation's major group", module="adoption")
        return v_eff(self.telework.rate(major_group), self.tier_shares.pi(major_group), self.tiers, region.tier, tau)

    def velocity(
        self,
        region_id: str,
        tau: float,
        major_group: Optional[str] = None,
        mode: Union[str, VelocityMode] = VelocityMode.RESIDENCE,
    ) -> float:
        return self.velocity_for(self.region(region_id), tau, major_group, mode)

    def remote_delta(self, major_group: str, region_id: str, tau: float) -> float:
        """Percentage change of V_eff against the residence velocity."""
        residence = self.residence_velocity(region_id, tau)
        if residence == 0.0:
            raise InvariantError(f"Residence velocity of {region_id} is 0 at tau={tau:g}", module="adoption")
        remote = self.velocity(region_id, tau, major_group, VelocityMode.REMOTE_ADJUSTED)
        return 100.0 * (remote / residence - 1.0)

    def with_tiers(self, tiers: Mapping[int, TierParams]) -> "AdoptionModel":
        """Copy of the model with some tier parameters replaced."""
        return AdoptionModel({**self.tiers, **tiers}, list(self.regions.values()), self.telework, self.tier_shares)

    def with_region_tier(self, region_id: str, tier: int) -> "AdoptionModel":
        """Copy of the model with one region reassigned to another tier."""
        if tier not in TIERS:
            raise InvariantError(f"Tier must be one of {TIERS}, got {tier}", module="adoption")
        moved = self.region(region_id).model_copy(update={"tier": tier})
        regions = [moved if r.region_id == region_id else r for r in self.regions.values()]
        logger.debug(f"Reassigned region {region_id} to tier {tier}")
        return AdoptionModel(self.tiers, regions, self.telework, self.tier_shares)
