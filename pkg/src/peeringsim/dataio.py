"""Ingestion, validation, and serialization.

County and exchange tables are comma-separated UTF-8 with a mandatory
header; every row is validated and errors carry the file line and column
name. Scenarios are TOML with unknown keys rejected (sweep configs are
typo-prone) and missing required keys reported all at once. Result tables
serialize numbers as 9-significant-digit scientific text so that a
write/read/write cycle is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .geo import County, IxpSite, TrafficCostParams
from .market import ConsumerPopulation, CostVector
from .equilibrium import MarketTargets

_COUNTY_COLUMNS = ("fips", "name", "lat", "lon", "population", "land_area_km2")
_IXP_COLUMNS = ("rank", "name", "metro", "lat", "lon")


def bundled_data_path(name: str) -> Path:
    """Path of a data file shipped with the package."""
    return Path(resources.files("peeringsim").joinpath("data", name))


def _read_rows(path, expected_columns):
    path = Path(path)
    # missing/unreadable files surface as OSError (distinct exit code)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, header row required") from None
        if tuple(h.strip() for h in header) != expected_columns:
            raise ValidationError(
                f"{path}: header {header!r} does not match required columns "
                f"{list(expected_columns)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_columns):
                raise ValidationError(
                    f"{path}: row at line {lineno} has {len(row)} fields, "
                    f"expected {len(expected_columns)}")
            rows.append((lineno, dict(zip(expected_columns, row))))
    return rows


def _field(path, lineno, record, column, conv):
    raw = record[column].strip()
    try:
        return conv(raw)
    except ValueError:
        raise ValidationError(
            f"{path}: line {lineno}, column '{column}': cannot parse {raw!r}"
        ) from None


def load_counties(path) -> list[County]:
    """Read and validate a county table (gazetteer-style layout)."""
    counties = []
    seen: dict[str, int] = {}
    for lineno, rec in _read_rows(path, _COUNTY_COLUMNS):
        fips = rec["fips"].strip()
        if not fips:
            raise ValidationError(f"{path}: line {lineno}, column 'fips': empty")
        if fips in seen:
            raise ValidationError(
                f"{path}: line {lineno}: duplicate fips {fips} "
                f"(first seen at line {seen[fips]})")
        seen[fips] = lineno
        try:
            counties.append(County(
                fips_code=fips,
                name=rec["name"].strip(),
                centroid_lat=_field(path, lineno, rec, "lat", float),
                centroid_lon=_field(path, lineno, rec, "lon", float),
                population=_field(path, lineno, rec, "population", int),
                land_area_km2=_field(path, lineno, rec, "land_area_km2", float),
            ))
        except ValidationError as exc:
            raise ValidationError(f"{path}: line {lineno}: {exc}") from None
    if not counties:
        raise ValidationError(f"{path}: no county rows")
    return counties


def load_ixps(path) -> list[IxpSite]:
    """Read and validate an exchange-site table."""
    sites = []
    ranks: dict[int, int] = {}
    for lineno, rec in _read_rows(path, _IXP_COLUMNS):
        rank = _field(path, lineno, rec, "rank", int)
        if rank in ranks:
            raise ValidationError(
                f"{path}: line {lineno}: duplicate rank {rank} "
                f"(first seen at line {ranks[rank]})")
        ranks[rank] = lineno
        try:
            sites.append(IxpSite(
                name=rec["name"].strip(),
                metro=rec["metro"].strip(),
                lat=_field(path, lineno, rec, "lat", float),
                lon=_field(path, lineno, rec, "lon", float),
                rank=rank,
            ))
        except ValidationError as exc:
            raise ValidationError(f"{path}: line {lineno}: {exc}") from None
    if not sites:
        raise ValidationError(f"{path}: no exchange rows")
    return sites


# Scenario schema: {section: {key: (type, default-or-REQUIRED)}}
_REQUIRED = object()
_SCHEMA = {
    None: {"n_consumers": (int, 40_000_000)},
    "population": {
        "mu_basic": (float, _REQUIRED),
        "mu_premium": (float, _REQUIRED),
        "mu_video": (float, _REQUIRED),
        "sigma_basic": (float, None),
        "sigma_premium": (float, None),
        "sigma_video": (float, None),
        "sigma_ratio": (float, 0.25),
    },
    "calibration": {
        "p_basic": (float, _REQUIRED),
        "p_premium_increment": (float, _REQUIRED),
        "share_basic": (float, _REQUIRED),
        "share_premium_only": (float, _REQUIRED),
        "share_premium_video": (float, _REQUIRED),
        "sigma_ratio": (float, 0.25),
    },
    "costs": {
        "basic": (float, None),
        "premium_increment": (float, None),
        "video_increment": (float, _REQUIRED),
        "vsp": (float, 0.0),
    },
    "pricing": {
        "video_base": (float, _REQUIRED),
        "pass_through": (float, 1.0),
    },
    "sweeps": {
        "fee_grid": (list, None),
        "fee_min": (float, None),
        "fee_max": (float, None),
        "fee_step": (float, None),
        "cd_grid": (list, None),
        "cd_min": (float, None),
        "cd_max": (float, None),
        "cd_step": (float, None),
        "fee_range": (list, [-10.0, 10.0]),
        "n_min": (int, 1),
        "n_max": (int, None),
        "x_list": (list, [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
        "subset_rule": (str, "by_rank"),
        "oracle_price_points": (int, 20),
        "oracle_mc_samples": (int, 10_000_000),
        "oracle_grid_scenarios": (int, 5),
    },
    "topology": {
        "counties_file": (str, None),
        "ixps_file": (str, None),
    },
    "traffic": {
        "volume_down": (float, 1.0),
        "unit_cost_backbone": (float, 1.0),
        "unit_cost_middle": (float, 10.0),
        "unit_cost_access": (float, 100.0),
        "video_subscribers": (float, None),
    },
    "output": {"directory": (str, "out")},
}


@dataclass(frozen=True)
class Scenario:
    """Validated experiment configuration with resolved defaults."""

    mode: str                              # "population" | "calibration"
    population: ConsumerPopulation | None  # set in population mode
    targets: MarketTargets | None          # set in calibration mode
    costs: CostVector | None               # set in population mode
    c_video_increment: float
    c_vsp: float
    p_video_base: float
    pass_through: float
    n_consumers: int
    fee_grid: tuple[float, ...] | None
    cd_grid: tuple[float, ...] | None
    fee_range: tuple[float, float]
    n_range: tuple[int, ...] | None
    x_list: tuple[float, ...]
    subset_rule: str
    counties_file: str
    ixps_file: str
    traffic: TrafficCostParams
    video_subscribers: float | None
    oracle_price_points: int
    oracle_mc_samples: int
    oracle_grid_scenarios: int
    out_dir: str
    fingerprint: str


def _coerce(value, typ, where):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{where}: expected an integer, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ValidationError(f"{where}: expected a string, got {value!r}")
        return value
    if typ is list:
        if not isinstance(value, list):
            raise ValidationError(f"{where}: expected a list, got {value!r}")
        return value
    raise AssertionError(typ)


def _grid(cfg, prefix, where):
    explicit = cfg.get(f"{prefix}_grid")
    lo, hi, step = (cfg.get(f"{prefix}_min"), cfg.get(f"{prefix}_max"),
                    cfg.get(f"{prefix}_step"))
    if explicit is not None and lo is not None:
        raise ValidationError(
            f"{where}: give either {prefix}_grid or {prefix}_min/max/step, not both")
    if explicit is not None:
        grid = tuple(float(v) for v in explicit)
        if len(grid) == 0:
            raise ValidationError(f"{where}: {prefix}_grid must not be empty")
        if list(grid) != sorted(grid):
            raise ValidationError(f"{where}: {prefix}_grid must be sorted")
        return grid
    if lo is None and hi is None and step is None:
        return None
    if lo is None or hi is None or step is None or step <= 0 or hi < lo:
        raise ValidationError(
            f"{where}: {prefix}_min/{prefix}_max/{prefix}_step must be a valid range")
    n = int(round((hi - lo) / step))
    return tuple(round(lo + i * step, 10) for i in range(n + 1))


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _digest_file_rows(path, columns) -> str:
    rows = [tuple(v.strip() for v in rec.values())
            for _, rec in _read_rows(path, columns)]
    return hashlib.sha256(_canonical(rows).encode()).hexdigest()


def load_scenario(path) -> Scenario:
    """Parse, validate, and resolve a scenario file."""
    path = Path(path)
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: invalid TOML: {exc}") from exc

    # reject unknown keys anywhere
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in _SCHEMA:
                raise ValidationError(f"{path}: unknown section [{key}]")
            for sub in value:
                if sub not in _SCHEMA[key]:
                    raise ValidationError(f"{path}: unknown key '{key}.{sub}'")
        elif key not in _SCHEMA[None]:
            raise ValidationError(f"{path}: unknown top-level key '{key}'")

    # resolve values and collect missing required keys exhaustively
    resolved: dict[str, dict] = {}
    missing = []
    for section, keys in _SCHEMA.items():
        src = raw if section is None else raw.get(section, {})
        out = {}
        for key, (typ, default) in keys.items():
            where = key if section is None else f"{section}.{key}"
            if key in src:
                out[key] = _coerce(src[key], typ, f"{path}: {where}")
            elif default is _REQUIRED:
                # required only if the section is active; checked later
                out[key] = _REQUIRED
                missing.append(where)
            else:
                out[key] = default
        resolved[section or "_top"] = out

    has_pop = "population" in raw
    has_cal = "calibration" in raw
    if has_pop == has_cal:
        raise ValidationError(
            f"{path}: exactly one of [population] or [calibration] is required")
    active = {"population"} if has_pop else {"calibration"}
    active |= {"costs", "pricing"}
    really_missing = [m for m in missing if m.split(".")[0] in active]
    if really_missing:
        raise ValidationError(
            f"{path}: missing required keys: {', '.join(sorted(really_missing))}")

    top = resolved["_top"]
    pricing = resolved["pricing"]
    costs_cfg = resolved["costs"]
    sweeps = resolved["sweeps"]
    topo = resolved["topology"]
    traffic_cfg = resolved["traffic"]

    n_consumers = top["n_consumers"]
    if n_consumers <= 0:
        raise ValidationError(f"{path}: n_consumers must be positive")
    if not 0.0 < pricing["pass_through"] <= 1.0:
        raise ValidationError(f"{path}: pricing.pass_through must lie in (0, 1]")

    population = None
    targets = None
    costs = None
    if has_pop:
        p = resolved["population"]
        ratio = p["sigma_ratio"]
        sigmas = [p["sigma_basic"] or ratio * p["mu_basic"],
                  p["sigma_premium"] or ratio * p["mu_premium"],
                  p["sigma_video"] or ratio * p["mu_video"]]
        try:
            population = ConsumerPopulation(
                p["mu_basic"], sigmas[0], p["mu_premium"], sigmas[1],
                p["mu_video"], sigmas[2], n_consumers)
        except ValueError as exc:
            raise ValidationError(f"{path}: [population]: {exc}") from None
        if costs_cfg["basic"] is None or costs_cfg["premium_increment"] is None:
            raise ValidationError(
                f"{path}: population mode requires costs.basic and "
                "costs.premium_increment")
        try:
            costs = CostVector(costs_cfg["basic"], costs_cfg["premium_increment"],
                               costs_cfg["video_increment"], costs_cfg["vsp"])
        except ValueError as exc:
            raise ValidationError(f"{path}: [costs]: {exc}") from None
    else:
        if costs_cfg["basic"] is not None or costs_cfg["premium_increment"] is not None:
            raise ValidationError(
                f"{path}: calibration mode derives costs.basic and "
                "costs.premium_increment; remove them")
        c = resolved["calibration"]
        try:
            targets = MarketTargets(
                target_p_basic=c["p_basic"],
                target_p_premium_increment=c["p_premium_increment"],
                target_share_basic=c["share_basic"],
                target_share_premium_only=c["share_premium_only"],
                target_share_premium_video=c["share_premium_video"],
                given_c_video_increment=costs_cfg["video_increment"],
                given_p_video_base=pricing["video_base"],
                given_pass_through=pricing["pass_through"],
                sigma_ratio=c["sigma_ratio"],
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}: [calibration]: {exc}") from None

    fee_range_list = sweeps["fee_range"]
    if len(fee_range_list) != 2:
        raise ValidationError(f"{path}: sweeps.fee_range must be [low, high]")
    fee_range = (float(fee_range_list[0]), float(fee_range_list[1]))

    counties_file = topo["counties_file"] or str(bundled_data_path("us_counties.csv"))
    ixps_file = topo["ixps_file"] or str(bundled_data_path("us_ixps.csv"))

    try:
        traffic = TrafficCostParams(
            volume_down=traffic_cfg["volume_down"],
            unit_cost_backbone=traffic_cfg["unit_cost_backbone"],
            unit_cost_middle=traffic_cfg["unit_cost_middle"],
            unit_cost_access=traffic_cfg["unit_cost_access"])
    except ValidationError as exc:
        raise ValidationError(f"{path}: [traffic]: {exc}") from None

    n_max = sweeps["n_max"]
    n_range = None
    if n_max is not None:
        if not 1 <= sweeps["n_min"] <= n_max:
            raise ValidationError(f"{path}: sweeps.n_min..n_max invalid")
        n_range = tuple(range(sweeps["n_min"], n_max + 1))
    x_list = tuple(float(x) for x in sweeps["x_list"])
    if any(not 0.0 <= x <= 1.0 for x in x_list):
        raise ValidationError(f"{path}: sweeps.x_list entries must lie in [0, 1]")

    # the output directory is not a semantic input; everything else is
    semantic = {
        "mode": "population" if has_pop else "calibration",
        "resolved": {k: {kk: (vv if vv is not _REQUIRED else None)
                         for kk, vv in v.items()}
                     for k, v in resolved.items() if k != "output"},
        "counties": _digest_file_rows(counties_file, _COUNTY_COLUMNS),
        "ixps": _digest_file_rows(ixps_file, _IXP_COLUMNS),
    }
    fingerprint = hashlib.sha256(_canonical(semantic).encode()).hexdigest()

    return Scenario(
        mode="population" if has_pop else "calibration",
        population=population,
        targets=targets,
        costs=costs,
        c_video_increment=costs_cfg["video_increment"],
        c_vsp=costs_cfg["vsp"],
        p_video_base=pricing["video_base"],
        pass_through=pricing["pass_through"],
        n_consumers=n_consumers,
        fee_grid=_grid(sweeps, "fee", path),
        cd_grid=_grid(sweeps, "cd", path),
        fee_range=fee_range,
        n_range=n_range,
        x_list=x_list,
        subset_rule=sweeps["subset_rule"],
        counties_file=counties_file,
        ixps_file=ixps_file,
        traffic=traffic,
        video_subscribers=traffic_cfg["video_subscribers"],
        oracle_price_points=sweeps["oracle_price_points"],
        oracle_mc_samples=sweeps["oracle_mc_samples"],
        oracle_grid_scenarios=sweeps["oracle_grid_scenarios"],
        out_dir=resolved["output"]["directory"],
        fingerprint=fingerprint,
    )


_NUMERIC_TYPES = {"money", "fraction", "km", "count"}
_TABLE_TYPES = _NUMERIC_TYPES | {"int", "text"}


@dataclass
class ResultTable:
    """Typed rows plus the experiment tag and scenario fingerprint."""

    experiment: str
    fingerprint: str
    columns: tuple[str, ...]
    dtypes: tuple[str, ...]
    rows: list[tuple]

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.dtypes = tuple(self.dtypes)
        if len(self.columns) != len(self.dtypes):
            raise ValidationError("columns and dtypes must align")
        for dt in self.dtypes:
            if dt not in _TABLE_TYPES:
                raise ValidationError(f"unknown column type {dt!r}")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise ValidationError(
                    f"row {i} has {len(row)} fields, expected {len(self.columns)}")

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


def _format_cell(value, dtype: str) -> str:
    if dtype in _NUMERIC_TYPES:
        v = float(value)
        if math.isnan(v):
            return "nan"
        return f"{v:.8e}"
    if dtype == "int":
        return str(int(value))
    return str(value)


def _parse_cell(text: str, dtype: str):
    if dtype in _NUMERIC_TYPES:
        return float(text)
    if dtype == "int":
        return int(text)
    return text


def write_results(table: ResultTable, path) -> None:
    """Serialize a result table; numeric text carries 9 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        f.write(f"# experiment={table.experiment}\n")
        f.write(f"# fingerprint={table.fingerprint}\n")
        f.write(f"# types={','.join(table.dtypes)}\n")
        writer = csv.writer(f)
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_format_cell(v, dt)
                             for v, dt in zip(row, table.dtypes)])


def read_results(path) -> ResultTable:
    """Parse a table written by :func:`write_results`."""
    path = Path(path)
    meta = {}
    with path.open(newline="", encoding="utf-8") as f:
        pos = f.tell()
        while True:
            line = f.readline()
            if not line.startswith("# "):
                f.seek(pos)
                break
            key, _, value = line[2:].rstrip("\n").partition("=")
            meta[key] = value
            pos = f.tell()
        reader = csv.reader(f)
        columns = tuple(next(reader))
        dtypes = tuple(meta.get("types", "").split(","))
        if len(dtypes) != len(columns):
            raise ValidationError(f"{path}: types comment does not match header")
        rows = [tuple(_parse_cell(cell, dt) for cell, dt in zip(row, dtypes))
                for row in reader if row]
    return ResultTable(meta.get("experiment", ""), meta.get("fingerprint", ""),
                       columns, dtypes, rows)
