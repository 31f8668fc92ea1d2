import json

import numpy as np
import pytest

from slgp.io import (DEFAULT_CONFIG, TEMPERATURE_SCHEMA, ConfigError, CsvSchema, DataError, Rescaling,
                     holdout_split, key_locations, load_config, load_dataset_csv, read_csv_table,
                     read_density_csv, validate_config, write_csv, write_json)

from conftest import write_station_csv

LATLON = CsvSchema(["lat"], "temp")


def test_two_row_rescale(tmp_path):
    f = tmp_path / "two.csv"
    f.write_text("lat,temp\n46.0,1.5\n47.0,2.5\n")
    ds, resc = load_dataset_csv(f, LATLON)
    np.testing.assert_array_equal(ds.x[:, 0], [0.0, 1.0])
    # default T is the data range widened by 10% per side
    np.testing.assert_allclose(resc.response.lower + resc.response.upper, (1.4, 2.6))
    np.testing.assert_allclose(ds.t[:, 0], [0.1 / 1.2, 1.1 / 1.2])


def test_configured_interval(tmp_path):
    f = tmp_path / "two.csv"
    f.write_text("lat,temp\n46.0,1.5\n47.0,2.5\n")
    ds, _ = load_dataset_csv(f, LATLON, t_interval=(0, 5))
    np.testing.assert_allclose(ds.t[:, 0], [0.3, 0.5])
    with pytest.raises(DataError):
        load_dataset_csv(f, LATLON, t_interval=(2, 5))


def test_temperature_schema(tmp_path):
    f = write_station_csv(tmp_path / "meteo.csv")
    ds, resc = load_dataset_csv(f, TEMPERATURE_SCHEMA)
    assert ds.domain.d_D == 3 and ds.domain.d_T == 1
    assert ds.n == 29 * 20
    assert set(ds.passthrough) == {"Date"} and ds.passthrough["Date"][0] == "2019-01-01"
    assert len(set(ds.keys)) == 29
    assert resc.location_columns == ("Latitude", "Longitude", "Altitude")
    assert ds.x.min() == 0.0 and ds.x.max() == 1.0


def test_malformed_row_rejected_with_line_number(tmp_path):
    f = write_station_csv(tmp_path / "meteo.csv", n_stations=3, n_days=4, bad_lines=(5,))
    ds, _ = load_dataset_csv(f, TEMPERATURE_SCHEMA)
    rep = ds.metadata["load_report"]
    assert ds.n == 11 and rep["rows_read"] == 12 and rep["rows_loaded"] == 11
    # data row 5 sits on file line 7 (header is line 1)
    assert [r["line"] for r in rep["rejected"]] == [7]
    assert "n/a" in f.read_text().splitlines()[6]


def test_load_errors(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_dataset_csv(tmp_path / "nope.csv", LATLON)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_dataset_csv(empty, LATLON)
    nocol = tmp_path / "nocol.csv"
    nocol.write_text("lat,temperature\n46,1\n")
    with pytest.raises(DataError, match="missing"):
        load_dataset_csv(nocol, LATLON)
    header_only = tmp_path / "header.csv"
    header_only.write_text("lat,temp\n")
    with pytest.raises(DataError):
        load_dataset_csv(header_only, LATLON)


def test_holdout(tmp_path):
    ds, _ = load_dataset_csv(write_station_csv(tmp_path / "m.csv"), TEMPERATURE_SCHEMA)
    train, test = holdout_split(ds, ["ST01", "ST07", "ST20"])
    assert len(set(train.keys)) == 26 and len(set(test.keys)) == 3
    assert train.n + test.n == ds.n
    assert not set(train.keys) & set(test.keys)
    tr, te = holdout_split(ds, [])
    assert te.n == 0 and tr.n == ds.n
    tr, te = holdout_split(ds, sorted(set(ds.keys)))
    assert tr.n == 0 and te.n == ds.n
    with pytest.raises(DataError, match="unknown"):
        holdout_split(ds, ["nowhere"])
    locs = key_locations(ds)
    assert list(locs)[:2] == ["ST00", "ST01"] and locs["ST00"].shape == (3,)


def test_rescale_roundtrip_and_idempotent_load(tmp_path):
    f = write_station_csv(tmp_path / "m.csv", seed=3)
    ds1, r1 = load_dataset_csv(f, TEMPERATURE_SCHEMA)
    ds2, r2 = load_dataset_csv(f, TEMPERATURE_SCHEMA)
    assert np.array_equal(ds1.x, ds2.x) and np.array_equal(ds1.t, ds2.t)
    assert np.array_equal(ds1.keys, ds2.keys) and r1 == r2
    _, rows, _ = read_csv_table(f)
    raw = np.array([[float(r[5]), float(r[4]), float(r[3])] for r in rows])
    np.testing.assert_allclose(r1.location.inverse(ds1.x), raw, rtol=0, atol=1e-12 * np.abs(raw).max())
    rng = np.random.default_rng(0)
    r = Rescaling([-3.0, 100.0], [5.0, 2500.0])
    pts = rng.uniform([-3, 100], [5, 2500], (100, 2))
    np.testing.assert_allclose(r.inverse(r.forward(pts)), pts, rtol=1e-12, atol=0)
    with pytest.raises(ValueError):
        Rescaling([1.0], [1.0])


def test_schema_roundtrip():
    assert CsvSchema.from_dict(TEMPERATURE_SCHEMA.to_dict()) == TEMPERATURE_SCHEMA
    with pytest.raises(ValueError):
        CsvSchema([], "t")


def test_config_defaults_and_errors(tmp_path):
    cfg = validate_config({})
    assert cfg == DEFAULT_CONFIG
    cfg = validate_config({"mcmc": {"beta": 0.3}})
    assert cfg["mcmc"]["beta"] == 0.3 and cfg["mcmc"]["thin"] == 10
    with pytest.raises(ConfigError, match="mcmc/beta"):
        validate_config({"mcmc": {"beta": 2.0}})
    with pytest.raises(ConfigError, match="kernel/lengthscales/1"):
        validate_config({"kernel": {"family": "se", "lengthscales": [0.1, -1]}})
    with pytest.raises(ConfigError, match="<root>"):
        validate_config({"unknown_field": 1})
    with pytest.raises(ConfigError, match="burn_in"):
        validate_config({"mcmc": {"n_iter": 10, "burn_in": 10}})
    with pytest.raises(ConfigError, match="kernel/nu"):
        validate_config({"kernel": {"family": "matern", "nu": None}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"seed": 4, "p": 10}))
    assert load_config(good)["seed"] == 4


def test_csv_json_artifacts(tmp_path):
    meta = {"format_version": 1, "seed": 3, "config": {"a": 1}}
    write_csv(tmp_path / "d.csv", ["x1", "t", "density"],
              [[0.5, 0.0, 1.0], [0.5, 1.0, 1.0], [0.7, 0.0, 2.0], [0.7, 1.0, 0.0]], meta)
    header, rows, back = read_csv_table(tmp_path / "d.csv")
    assert back == meta and header == ["x1", "t", "density"] and len(rows) == 4
    t, d = read_density_csv(tmp_path / "d.csv", 1)
    np.testing.assert_array_equal(t[:, 0], [0.0, 1.0])
    np.testing.assert_array_equal(d, [2.0, 0.0])
    with pytest.raises(DataError):
        read_density_csv(tmp_path / "d.csv", 2)
    write_json(tmp_path / "r.json", meta)
    assert json.loads((tmp_path / "r.json").read_text()) == meta
    assert not list(tmp_path.glob(".*.tmp"))
    # floats survive the text round trip exactly
    x = 0.1 + 0.2
    write_csv(tmp_path / "f.csv", ["v"], [[x]])
    assert float(read_csv_table(tmp_path / "f.csv")[1][0][0]) == x
