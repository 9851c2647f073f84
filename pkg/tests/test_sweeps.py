import json
import math

import pytest
from pydantic import ValidationError

from gaussdist.sweeps.sweep_models import OutputFormat, SweepQuantity, SweepSpec, SweepTable
from gaussdist.sweeps.sweep_repository import format_cell
from gaussdist.sweeps.sweep_service import POLAR_COLUMNS, SCALING_COLUMNS, polar_angles


@pytest.fixture
def quick_sweep_service(sweep_service, settings):
    settings.multistart_count = 8
    settings.polar_points = 256
    return sweep_service


def test_polar_angles_are_centred():
    angles = polar_angles(9)

    assert angles[4] == pytest.approx(math.pi / 4)
    assert all(0 < theta < math.pi / 2 for theta in angles)
    assert angles == sorted(angles)


def test_scaling_table_columns_follow_library(sweep_service, optimum_service):
    table = sweep_service.scaling_table([0.1, 1.0, 3.0])

    assert table.columns == SCALING_COLUMNS
    assert table.column("neg_log_F_coherent") == pytest.approx([0.4, 4.0, 12.0])
    assert table.column("neg_log_F_centered") == pytest.approx(
        [math.log(1.2), math.log(3.0), math.log(7.0)], rel=1e-7
    )
    assert table.column("neg_log_F_optimal") == pytest.approx(
        [optimum_service.closed_form_neg_log_fidelity(e) for e in (0.1, 1.0, 3.0)]
    )


def test_scaling_hierarchy(sweep_service):
    energies = [0.05 + k * 0.05 for k in range(100)]
    table = sweep_service.scaling_table(energies)

    for row in table.rows:
        _, coherent, centered, optimal, perr_optimal, perr_coherent = row
        assert coherent < optimal
        assert centered < optimal
        assert perr_optimal > perr_coherent


def test_polar_table_rows_and_footer(quick_sweep_service):
    table = quick_sweep_service.polar_table(0.5, 21)

    assert table.columns == POLAR_COLUMNS
    assert len(table.rows) == 21
    middle = table.rows[10]
    assert middle[0] == pytest.approx(math.pi / 4)
    assert middle[1] == pytest.approx(middle[2], rel=1e-12)
    assert len(table.footer) == 2
    assert all(row[4] < 1e-10 for row in table.footer)


def test_optimal_table_single_mode(quick_sweep_service):
    table = quick_sweep_service.optimal_table(0.5, seed=1)
    fields = dict(table.rows)

    assert fields["fidelity"] == pytest.approx(math.exp(-3.0), rel=1e-12)
    assert fields["pure_fidelity"] == pytest.approx(math.exp(-3.0), rel=1e-12)
    assert fields["relative_discrepancy"] < 1e-6
    assert fields["mean1_q"] == pytest.approx(-fields["mean2_q"])
    assert fields["cov_qq"] == pytest.approx(0.25)
    assert fields["cov_pp"] == pytest.approx(1.0)


def test_optimal_table_multimode(quick_sweep_service):
    table = quick_sweep_service.optimal_table(0.5, modes=3)
    fields = dict(table.rows)

    assert fields["modes"] == 3
    assert fields["neg_log_fidelity"] == pytest.approx(4 * 1.5**2 + 4 * 1.5)
    assert fields["lambda_1"] == pytest.approx(4.0, rel=1e-4)


@pytest.mark.parametrize(
    "quantity, width",
    [
        (SweepQuantity.OPTIMAL_FIDELITY, 7),
        (SweepQuantity.SCALING_COMPARE, 6),
        (SweepQuantity.MULTIMODE, 5),
        (SweepQuantity.POLAR_CURVES, 6),
    ],
)
def test_sweep_quantities(quick_sweep_service, quantity, width):
    spec = SweepSpec(quantity=quantity, start=0.2, stop=1.0, steps=3, modes=2)
    table = quick_sweep_service.sweep(spec)

    assert len(table.rows) == 3
    assert len(table.columns) == width
    assert table.column("E") == pytest.approx([0.2, 0.6, 1.0])


def test_oracle_sweep(quick_sweep_service):
    spec = SweepSpec(quantity=SweepQuantity.ORACLE_CHECK, start=0.1, stop=0.5, steps=2)
    table = quick_sweep_service.sweep(spec)

    assert all(error < 1e-10 for error in table.column("abs_error"))
    assert all(gap >= -1e-10 for gap in table.column("grid_gap"))


@pytest.mark.parametrize(
    "overrides",
    [
        {"start": 0.0},
        {"start": 2.0, "stop": 1.0},
        {"steps": 1},
        {"resolution": 16},
    ],
)
def test_sweep_spec_validation(overrides):
    arguments = {"quantity": SweepQuantity.OPTIMAL_FIDELITY, "start": 0.1, "stop": 1.0, "steps": 5}
    arguments.update(overrides)

    with pytest.raises(ValidationError):
        SweepSpec(**arguments)


def test_table_rejects_ragged_rows():
    with pytest.raises(ValidationError):
        SweepTable(command="x", columns=["a", "b"], rows=[[1.0]])


@pytest.mark.parametrize(
    "value, expected",
    [
        (None, ""),
        (True, "true"),
        (False, "false"),
        (0.1, "0.10000000000000001"),
        (3, "3"),
        ("minimum", "minimum"),
    ],
)
def test_format_cell(value, expected):
    assert format_cell(value) == expected


def test_csv_rendering(sweep_repository):
    table = SweepTable(
        command="polar",
        columns=["theta", "R1"],
        rows=[[0.5, None], [0.25, 2.0]],
        footer=[[0.785, "minimum"]],
        footer_columns=["theta", "kind"],
    )

    text = sweep_repository.render(table, OutputFormat.CSV)

    assert text == "theta,R1\n0.5,\n0.25,2\n# theta,kind\n# 0.78500000000000003,minimum\n"


def test_json_rendering(sweep_repository):
    table = SweepTable(
        command="scaling",
        columns=["E", "value"],
        rows=[[0.5, None]],
        metadata={"version": "1.0.0", "seed": 0, "argv": ["scaling"]},
    )

    document = json.loads(sweep_repository.render(table, OutputFormat.JSON))

    assert document["metadata"]["seed"] == 0
    assert document["rows"] == [{"E": 0.5, "value": None}]
    assert "footer" not in document


def test_save_to_file(sweep_repository, tmp_path):
    table = SweepTable(command="scaling", columns=["E"], rows=[[1.0]])
    path = tmp_path / "out.csv"

    sweep_repository.save(table, OutputFormat.CSV, path)

    assert path.read_text() == "E\n1\n"


def test_save_to_missing_directory(sweep_repository, tmp_path):
    table = SweepTable(command="scaling", columns=["E"], rows=[[1.0]])

    with pytest.raises(OSError):
        sweep_repository.save(table, OutputFormat.CSV, tmp_path / "missing" / "out.csv")
