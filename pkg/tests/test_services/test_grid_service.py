import math

import pytest

from calabi_lab.models.reports import ExperimentRecord
from calabi_lab.core.calabi.invariant import cal_from_hamiltonian
from calabi_lab.core.geometry.fields import Autonomous
from calabi_lab.services.grid_service import SHRINK_PLATEAU, grid_panels_per_cell, grid_service, grid_target_fraction
from calabi_lab.services.report_service import report_service
from calabi_lab.utils.exceptions import PlateauInfeasibleError, ValidationError


def _record(k, c0, cal, rho=0.36, l1inf=1.0):
    return ExperimentRecord(
        family="grid",
        param=float(k),
        cal_H=cal,
        c0_dist=c0,
        c0_spacing=0.01,
        l1inf=l1inf,
        l1inf_spacing=0.01,
        rho_achieved=rho,
    )


def test_target_fraction():
    assert grid_target_fraction(1) == 0.5
    assert grid_target_fraction(2) == 0.5
    assert grid_target_fraction(4) == 0.75


def test_grid_example(lab_config):
    record = grid_service.run_grid_example(0.5, 2, lab_config)
    volume = 0.5 ** 2

    assert record.family == "grid"
    assert record.param == 2.0
    assert record.rho_target == 0.5
    # transitions a fifth of the subcell wide cap the plateau fraction at 0.6^2
    assert record.rho_achieved == pytest.approx(0.36)
    assert record.rho_achieved * volume <= record.cal_H <= volume
    assert record.l1inf == pytest.approx(1.0)
    assert record.trajectories_confined
    assert 0.0 < record.c0_dist <= math.sqrt(2.0) * 0.25
    assert record.c0_uniform >= record.c0_dist
    assert record.cal_f == {"radial": None, "xdy": None}
    assert record.resolution == 9


def test_strict_policy_refuses_clamping(lab_config):
    strict = lab_config.model_copy(update={"plateau_policy": "strict"})
    with pytest.raises(PlateauInfeasibleError):
        grid_service.run_grid_example(0.5, 2, strict)


def test_invalid_grid_parameters(lab_config):
    with pytest.raises(ValidationError):
        grid_service.run_grid_example(0.0, 2, lab_config)
    with pytest.raises(ValidationError):
        grid_service.run_grid_example(0.5, 0, lab_config)


def test_envelope_accepts_a_good_sweep():
    records = [_record(2, 0.2, 0.2), _record(8, 0.04, 0.24, rho=0.8)]
    envelope = grid_service.envelope(records, 0.5, 1)
    assert envelope == {
        "c0_within_diameter": True,
        "cal_within_bounds": True,
        "l1inf_near_one": True,
        "c0_shrinks": True,
        "cal_persists": True,
    }


def test_envelope_flags_violations():
    records = [_record(2, 0.2, 0.2), _record(8, 0.1, 0.01, l1inf=0.5)]
    envelope = grid_service.envelope(records, 0.5, 1)
    assert not envelope["c0_within_diameter"]
    assert not envelope["cal_within_bounds"]
    assert not envelope["l1inf_near_one"]
    assert not envelope["c0_shrinks"]
    assert not envelope["cal_persists"]


def test_single_record_envelope_has_no_trend_checks():
    envelope = grid_service.envelope([_record(2, 0.2, 0.2)], 0.5, 1)
    assert set(envelope) == {"c0_within_diameter", "cal_within_bounds", "l1inf_near_one"}


def test_shrinking_support_keeps_calabi(lab_config):
    first = grid_service.run_shrinking_support(0.5, 1, lab_config)
    second = grid_service.run_shrinking_support(0.5, 2, lab_config)

    assert first.family == second.family == "shrink"
    assert second.cal_H == pytest.approx(first.cal_H, rel=1e-9)
    assert first.l1inf == pytest.approx(1.0)
    assert second.l1inf == pytest.approx(4.0)
    assert second.c0_dist <= math.sqrt(2.0) * 0.25
    assert first.rho_achieved == SHRINK_PLATEAU


def test_panels_per_cell_grow_with_k():
    assert [grid_panels_per_cell(k, 0.2) for k in range(1, 6)] == [5, 5, 6, 7, 8]
    assert grid_panels_per_cell(2, 0.45) == 3


def test_plateau_and_calabi_grow_with_k(lab_config):
    rhos, cals = [], []
    for k in range(2, 9):
        field, _, rho = grid_service.grid_field(0.5, k, lab_config)
        rhos.append(rho)
        cals.append(cal_from_hamiltonian(Autonomous(field), grid_service.grid_quadrature(k, lab_config)))

    assert all(later > earlier for earlier, later in zip(rhos, rhos[1:]))
    assert all(later >= earlier - 1e-12 for earlier, later in zip(cals, cals[1:]))
    # each axis integrates to cell (1 + s) / 2 with s = 1 - 2/P
    for k, cal in zip(range(2, 9), cals):
        s = 1.0 - 2.0 / grid_panels_per_cell(k, 0.2)
        assert cal == pytest.approx(0.25 * ((1.0 + s) / 2.0) ** 2, rel=1e-9)


def test_grid_csv_is_reproducible(lab_config):
    runs = [report_service.csv_text([grid_service.run_grid_example(0.5, 2, lab_config)]) for _ in range(2)]
    # wall_ms is the last column
    stripped = [[line.rsplit(",", 1)[0] for line in text.splitlines()] for text in runs]
    assert stripped[0] == stripped[1]
