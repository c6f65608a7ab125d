import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from calabi_lab.core.geometry.fields import (
    Autonomous,
    Modulated,
    PlateauBump,
    Superposition,
    TimeDepField,
    ZeroHamiltonian,
    rotation_well,
)
from calabi_lab.models.geometry import Box, TimeProfile
from calabi_lab.utils.exceptions import ValidationError
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)


class SuiteCatalog:
    """Named Hamiltonian suites loaded from data/suites/*.json"""

    def __init__(self, suites_dir: str = None):
        if suites_dir is None:
            suites_dir = Path(__file__).parent.parent.parent.parent / "data" / "suites"

        self.suites_dir = Path(suites_dir)
        self._suites: Dict[str, Dict[str, Any]] = {}
        self._load_suites()

    def _load_suites(self):
        """Load every suite file in the directory"""
        try:
            for path in sorted(self.suites_dir.glob("*.json")):
                with open(path, "r") as f:
                    data = json.load(f)
                self._suites[data["name"]] = data
            logger.info("Hamiltonian suites loaded", suites=sorted(self._suites), directory=str(self.suites_dir))
        except Exception as e:
            logger.error("Failed to load Hamiltonian suites", error=str(e))
            raise ValidationError(f"Failed to load Hamiltonian suites: {str(e)}")

    def suite_names(self) -> List[str]:
        return sorted(self._suites)

    def _suite(self, suite: str) -> Dict[str, Any]:
        if suite not in self._suites:
            raise ValidationError(f"Unknown suite: {suite}")
        return self._suites[suite]

    def member_names(self, suite: str) -> List[str]:
        return list(self._suite(suite)["members"])

    def pairs(self, suite: str) -> List[Tuple[str, str]]:
        """(H, K) member pairs used for composition checks"""
        return [tuple(pair) for pair in self._suite(suite).get("pairs", [])]

    def section_member(self, suite: str) -> str:
        return self._suite(suite).get("section_member", self.member_names(suite)[0])

    def describe(self, name: str, suite: Optional[str] = None) -> Dict[str, Any]:
        """Raw description of a member, searching every suite unless one is named"""
        suites = [suite] if suite else self.suite_names()
        for suite_name in suites:
            members = self._suite(suite_name)["members"]
            if name in members:
                return members[name]
        raise ValidationError(f"Unknown Hamiltonian: {name}")

    def build(self, name: str, n: int = 1, suite: Optional[str] = None, smoothing_floor: float = 0.02) -> TimeDepField:
        """Hamiltonian for a named member in R^{2n}"""
        return self._build_spec(self.describe(name, suite), n, smoothing_floor, name)

    def members(self, suite: str, n: int = 1, smoothing_floor: float = 0.02) -> List[Tuple[str, TimeDepField]]:
        return [(name, self.build(name, n, suite, smoothing_floor)) for name in self.member_names(suite)]

    def _build_spec(self, spec: Dict[str, Any], n: int, smoothing_floor: float, name: str) -> TimeDepField:
        kind = spec.get("kind")
        try:
            if kind == "sum":
                return Superposition(
                    [self._build_spec(term, n, smoothing_floor, name) for term in spec["terms"]]
                )
            box = Box.from_pairs(spec["x_range"], spec["y_range"], n)
            if kind == "zero":
                return ZeroHamiltonian(box)
            if kind == "plateau":
                field = PlateauBump(box, spec["rho"], spec.get("height", 1.0), smoothing_floor)
            elif kind == "rotation_well":
                field = rotation_well(box, spec["rho"], spec["rate"], smoothing_floor)
            else:
                raise ValidationError(f"Unknown Hamiltonian kind '{kind}' for member {name}")
        except KeyError as e:
            raise ValidationError(f"Hamiltonian {name} is missing field {e}")

        if "profile" in spec:
            return Modulated(field, TimeProfile(**spec["profile"]))
        return Autonomous(field)


# Global instance
suite_catalog = SuiteCatalog()
