import json

import numpy as np
import pytest

from calabi_lab.core.geometry.fields import Autonomous, Modulated, Superposition, ZeroHamiltonian
from calabi_lab.core.suites.catalog import SuiteCatalog, suite_catalog
from calabi_lab.utils.exceptions import ValidationError


def test_bundled_suites_are_loaded():
    assert suite_catalog.suite_names() == ["standard", "zero"]
    assert "bump_centered" in suite_catalog.member_names("standard")
    assert suite_catalog.section_member("standard") == "sequence_base"
    assert ("bump_centered", "modulated") in suite_catalog.pairs("standard")


@pytest.mark.parametrize("n", [1, 2])
def test_every_member_builds(n):
    for name, H in suite_catalog.members("standard", n):
        assert H.size == 2 * n, name
        assert H.support is not None, name


def test_member_kinds():
    assert isinstance(suite_catalog.build("bump_centered"), Autonomous)
    assert isinstance(suite_catalog.build("modulated"), Modulated)
    assert isinstance(suite_catalog.build("twin"), Superposition)
    assert isinstance(suite_catalog.build("zero", suite="zero"), ZeroHamiltonian)


def test_member_values():
    H = suite_catalog.build("bump_centered")
    assert H.value(0.5, np.zeros(2)) == pytest.approx(0.3)
    assert suite_catalog.describe("rotation_well")["rate"] == 0.4


def test_unknown_names_raise():
    with pytest.raises(ValidationError):
        suite_catalog.build("no_such_member")
    with pytest.raises(ValidationError):
        suite_catalog.member_names("no_such_suite")


def _write_suite(directory, members):
    directory.mkdir(exist_ok=True)
    with open(directory / "custom.json", "w") as f:
        json.dump({"name": "custom", "members": members}, f)
    return SuiteCatalog(str(directory))


def test_custom_suite_directory(tmp_path):
    catalog = _write_suite(tmp_path / "suites", {
        "only": {"kind": "plateau", "x_range": [0.0, 1.0], "y_range": [0.0, 2.0], "rho": 0.2},
    })
    assert catalog.suite_names() == ["custom"]
    assert catalog.section_member("custom") == "only"
    assert catalog.pairs("custom") == []
    assert catalog.build("only").support.volume == pytest.approx(2.0)


def test_malformed_members_raise(tmp_path):
    catalog = _write_suite(tmp_path / "suites", {
        "strange": {"kind": "spiral", "x_range": [0.0, 1.0], "y_range": [0.0, 1.0]},
        "incomplete": {"kind": "plateau", "x_range": [0.0, 1.0], "y_range": [0.0, 1.0]},
    })
    with pytest.raises(ValidationError):
        catalog.build("strange")
    with pytest.raises(ValidationError):
        catalog.build("incomplete")


def test_unreadable_suite_file_raises(tmp_path):
    (tmp_path / "broken.json").write_text("{not json")
    with pytest.raises(ValidationError):
        SuiteCatalog(str(tmp_path))
