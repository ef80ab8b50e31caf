import pytest

from noonmz.config import (
    BUNDLED,
    ConfigSyntaxError,
    ConfigRangeError,
    UnitMismatch,
    UnknownKey,
    bundled_text,
    load_config,
    parse_config,
    parse_length,
    parse_scenario,
)
from noonmz.experiment import SourceKind


def test_minimal_document_gets_defaults():
    s = parse_scenario("[source]\nkind = entangled\n")
    assert s.source is SourceKind.ENTANGLED
    assert s.spectral.lambda0_nm == pytest.approx(810)
    assert s.spectral.xi_single_um == 126 and s.spectral.xi_pump_um == 300
    assert s.pair_rate == 20000 and s.integration_time_s == 1
    assert s.delta_l2_grid_um[0] == -2 and s.delta_l2_grid_um[-1] == pytest.approx(2)
    assert len(s.delta_l2_grid_um) == 401


def test_units_convert():
    doc = "[delays]\ndelta_L1 = 0.2 mm\n[spectral]\nlambda0 = 0.81 um\n[rates]\npair_rate = 20 kHz\n"
    s = parse_scenario(doc)
    assert s.delta_l1_um == pytest.approx(200)
    assert s.spectral.lambda0_nm == pytest.approx(810)
    assert s.pair_rate == pytest.approx(20000)
    assert parse_length("10 nm") == pytest.approx(0.01)


def test_unit_required():
    with pytest.raises(UnitMismatch) as exc:
        parse_config("[source]\nkind = entangled\n\n[delays]\ndelta_L1 = 200\n")
    assert exc.value.line == 5 and exc.value.column == 1
    assert exc.value.key == "delays.delta_l1"


def test_unit_of_wrong_kind():
    with pytest.raises(UnitMismatch):
        parse_config("[delays]\ndelta_L1 = 200 s\n")
    with pytest.raises(UnitMismatch):
        parse_config("[detection]\nv_floor = 0.9 um\n")


def test_unknown_key_and_section():
    with pytest.raises(UnknownKey) as exc:
        parse_config("[source]\nkind = entangled\ncolour = blue\n")
    assert exc.value.line == 3
    with pytest.raises(UnknownKey):
        parse_config("[laser]\npower = 1\n")


def test_syntax_errors():
    with pytest.raises(ConfigSyntaxError):
        parse_config("kind = entangled\n")
    with pytest.raises(ConfigSyntaxError):
        parse_config("[source]\nkind = entangled\nkind = ghz\n")
    with pytest.raises(ConfigSyntaxError):
        parse_config("[spectral]\nenabled = maybe\n")


def test_range_errors():
    with pytest.raises(ConfigRangeError):
        parse_config("[detection]\nv_floor = 1.5\n")
    with pytest.raises(ConfigRangeError):
        parse_config("[source]\nkind = ghz\nn_photons = 9\n")
    with pytest.raises(ConfigRangeError):
        parse_config("[source]\nkind = laser\n")
    with pytest.raises(ConfigRangeError):
        parse_config("[spectral]\nxi_single = -3 um\n")
    with pytest.raises(ConfigRangeError):
        parse_config("[grid]\nfringe_step = 0 nm\n")


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_load(name):
    cfg = load_config(name)
    assert cfg.name == name
    assert bundled_text(name).strip()


def test_bundled_values():
    assert load_config("paper_single_photon").scenario.source is SourceKind.SINGLE_PHOTON
    assert load_config("paper_single_photon").scenario.spectral.xi_single_um == 130
    assert load_config("paper_dl1_200").scenario.delta_l1_um == 200
    assert load_config("paper_dl1_10000").scenario.coupling_efficiency == 0.3
    assert load_config("paper_hom").scenario.v_floor == 0.945


def test_load_from_path(tmp_path):
    p = tmp_path / "mine.ini"
    p.write_text("[source]\nkind = ghz\nn_photons = 3\n")
    cfg = load_config(str(p))
    assert cfg.name == "mine" and cfg.scenario.n_photons == 3
    with pytest.raises(FileNotFoundError):
        load_config("no_such_config")
