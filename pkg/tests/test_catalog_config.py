import datetime as dt
import json

import numpy as np
import pytest
from pydantic import ValidationError

from lifecat.catalog import CatalogError, EventCatalog, read_catalog, write_catalog, year_position
from lifecat.config import RunConfig, config_hash, load_config
from lifecat.catmodel import small_event_intensity


def _write(tmp_path, text, name="cat.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_read_catalog_roundtrip(tmp_path):
    dates = [dt.date(1950, 3, 1), dt.date(1910, 7, 2), dt.date(2009, 12, 31)]
    p = write_catalog(tmp_path / "c.csv", dates, [25, 3, 140], ["CH", "AT", "CH"])
    cat = read_catalog(p)
    assert cat.dates == tuple(sorted(dates))
    assert cat.deaths.tolist() == [3, 25, 140]
    assert cat.countries == ("AT", "CH", "CH")
    assert cat.start == dt.date(1910, 1, 1) and cat.end == dt.date(2009, 12, 31)


def test_whole_year_window_has_integer_span(tmp_path):
    p = write_catalog(tmp_path / "c.csv", [dt.date(1910, 5, 5), dt.date(2009, 1, 1)], [4, 5])
    assert read_catalog(p).span == pytest.approx(100.0, abs=1e-12)


def test_event_times_sit_mid_day():
    cat = EventCatalog((dt.date(2001, 1, 1), dt.date(2004, 12, 31)), np.array([2, 3]), ("X", "X"),
                       dt.date(2001, 1, 1), dt.date(2004, 12, 31))
    t = cat.times
    assert t[0] == pytest.approx(0.5 / 365)
    assert t[1] == pytest.approx(3 + 365.5 / 366)
    assert cat.span == pytest.approx(4.0)


def test_waiting_times_start_at_window_origin():
    cat = EventCatalog((dt.date(2001, 7, 2), dt.date(2002, 7, 2), dt.date(2003, 1, 1)), np.array([30, 5, 40]),
                       ("X",) * 3, dt.date(2001, 1, 1), dt.date(2003, 12, 31))
    w = cat.waiting_times()
    assert w[0] == pytest.approx(cat.times[0])
    assert w.sum() == pytest.approx(cat.times[-1])
    big = cat.waiting_times(20)
    assert big.size == 2
    assert big.sum() == pytest.approx(cat.times[2])


def test_year_position():
    assert year_position(dt.date(2000, 1, 1), 1990) == 10.0
    assert year_position(dt.date(2000, 7, 1), 2000) == pytest.approx(182 / 366)


def test_country_filter_and_threshold(tmp_path):
    p = write_catalog(tmp_path / "c.csv", [dt.date(2000, 1, 1), dt.date(2000, 2, 1), dt.date(2000, 3, 1)],
                      [10, 30, 50], ["CH", "AT", "CH"])
    cat = read_catalog(p)
    ch = cat.country("CH")
    assert ch.deaths.tolist() == [10, 50]
    assert ch.span == cat.span
    assert cat.above(20).deaths.tolist() == [30, 50]
    s = cat.excess_sample(20)
    assert s.count == 2 and s.excesses.tolist() == [10, 30]


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("date,deaths,country\n2000-01-01,5,CH\n2000-13-01,5,CH\n", ":3: bad date"),
        ("date,deaths,country\n2000-01-01,five,CH\n", ":2: death count must be an integer"),
        ("date,deaths,country\n2000-01-01,0,CH\n", ":2: death count must be positive"),
        ("date,deaths,country\n2000-01-01,4\n", ":2: expected 3 fields"),
        ("when,n,where\n2000-01-01,4,CH\n", ":1: expected header"),
        ("date,deaths,country\n", "no events"),
        ("", "empty file"),
    ],
)
def test_read_catalog_errors(tmp_path, body, fragment):
    p = _write(tmp_path, body)
    with pytest.raises(CatalogError, match=fragment):
        read_catalog(p)


def test_window_errors(tmp_path):
    p = write_catalog(tmp_path / "c.csv", [dt.date(2000, 6, 1)], [7])
    with pytest.raises(CatalogError, match="outside the window"):
        read_catalog(p, start=dt.date(2001, 1, 1), end=dt.date(2002, 12, 31))
    with pytest.raises(CatalogError):
        read_catalog(tmp_path / "missing.csv")
    with pytest.raises(CatalogError, match="precedes"):
        EventCatalog((), np.array([], dtype=int), (), dt.date(2001, 1, 1), dt.date(2000, 1, 1))


def test_blank_lines_are_skipped(tmp_path):
    p = _write(tmp_path, "date,deaths,country\n\n2000-01-01,5,CH\n,,\n")
    assert len(read_catalog(p)) == 1


# config


def test_default_config_builds():
    cfg = load_config(None)
    assert cfg.model.build().total_intensity == pytest.approx(2.28, abs=1e-12)
    assert set(cfg.build_contracts()) == {"per_risk", "per_occurrence", "stop_loss"}


def test_invalid_json_names_line(tmp_path):
    p = _write(tmp_path, '{\n  "run": {\n    "n_sim": ,\n  }\n}\n', "cfg.json")
    with pytest.raises(ValueError, match=r"cfg\.json:3: invalid JSON"):
        load_config(p)


@pytest.mark.parametrize(
    "doc",
    [
        {"run": {"n_sim": 0}},
        {"run": {"typo": 1}},
        {"model": {"small_probs": [0.5, 0.5, 0.5]}},
        {"model": {"u1": 3, "u2": 3}},
        {"model": {"negbin_p": 1.0}},
        {"proportions": {"mode": "uniform"}},
        {"contracts": [{"type": "per_risk", "retention": -1, "limit": 5}]},
        {"contracts": [{"type": "stop_loss", "retention": 1, "limit": 5},
                       {"type": "stop_loss", "retention": 2, "limit": 5}]},
        {"contracts": [{"type": "quota_share"}]},
    ],
)
def test_config_validation_errors(tmp_path, doc):
    p = _write(tmp_path, json.dumps(doc), "cfg.json")
    with pytest.raises(ValidationError):
        load_config(p)


def test_no_event_probability_sets_small_intensity():
    cfg = RunConfig.model_validate({"model": {"no_event_probability": 0.1}})
    m = cfg.model.build()
    lam1 = small_event_intensity(0.1, [0.5, 0.15])
    assert m.components[0].intensity == pytest.approx(lam1)
    assert np.exp(-m.total_intensity) == pytest.approx(0.1)


def test_config_hash_is_stable_and_sensitive():
    a = RunConfig()
    b = RunConfig.model_validate(json.loads(json.dumps(a.model_dump(mode="json"))))
    assert config_hash(a) == config_hash(b)
    c = RunConfig.model_validate({"run": {"seed": 1}})
    assert config_hash(a) != config_hash(c)
