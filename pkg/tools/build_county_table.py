#!/usr/bin/env python3
"""Build the bundled stand-in county table (data/us_counties.csv).

The file mimics the census gazetteer layout (fips, name, lat, lon,
population, land_area_km2) for the contiguous United States without
shipping census data: state populations, county counts, and roughly one
hundred metro anchors are encoded from public round numbers, metro
population is split across clustered counties near each anchor, and the
rural remainder is scattered quasi-uniformly over per-state interior
boxes with a seeded generator. Re-running the script reproduces the file
byte for byte.

Usage: python tools/build_county_table.py [out.csv]
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np

SEED = 20240917

# fips, abbrev, population (thousands), counties, land area (1000 km^2),
# interior boxes (lat_min, lat_max, lon_min, lon_max, weight)
STATES = [
    (1, "AL", 5024, 67, 131, [(31.0, 34.8, -88.2, -85.5, 1.0)]),
    (4, "AZ", 7152, 15, 295, [(31.6, 36.7, -114.3, -109.3, 1.0)]),
    (5, "AR", 3011, 75, 135, [(33.2, 36.3, -94.4, -90.3, 1.0)]),
    (6, "CA", 39538, 58, 404, [(37.0, 41.5, -123.0, -120.0, 0.45),
                               (32.8, 37.0, -119.8, -114.8, 0.55)]),
    (8, "CO", 5774, 64, 268, [(37.2, 40.8, -108.5, -102.3, 1.0)]),
    (9, "CT", 3606, 8, 12, [(41.3, 41.95, -73.5, -72.0, 1.0)]),
    (10, "DE", 990, 3, 5, [(38.6, 39.7, -75.7, -75.2, 1.0)]),
    (11, "DC", 690, 1, 0.2, [(38.85, 38.95, -77.06, -76.95, 1.0)]),
    (12, "FL", 21538, 67, 138, [(25.9, 29.8, -82.4, -80.3, 0.6),
                                (29.8, 31.0, -87.0, -81.5, 0.4)]),
    (13, "GA", 10712, 159, 149, [(31.0, 34.8, -85.2, -81.2, 1.0)]),
    (16, "ID", 1839, 44, 214, [(42.2, 44.5, -116.8, -111.8, 0.6),
                               (44.5, 48.5, -116.7, -113.0, 0.4)]),
    (17, "IL", 12813, 102, 144, [(37.5, 42.3, -90.8, -87.6, 1.0)]),
    (18, "IN", 6786, 92, 93, [(38.0, 41.6, -87.5, -85.0, 1.0)]),
    (19, "IA", 3190, 99, 144, [(40.7, 43.2, -93.8, -90.8, 0.75),
                               (40.7, 43.2, -95.8, -93.8, 0.25)]),
    (20, "KS", 2938, 105, 211, [(37.2, 39.9, -101.8, -94.8, 1.0)]),
    (21, "KY", 4506, 120, 102, [(36.7, 38.8, -88.8, -82.8, 1.0)]),
    (22, "LA", 4658, 64, 112, [(29.5, 32.8, -93.8, -90.0, 1.0)]),
    (23, "ME", 1362, 16, 80, [(43.2, 46.5, -70.8, -68.0, 1.0)]),
    (24, "MD", 6177, 24, 25, [(38.2, 39.6, -77.2, -75.3, 0.7),
                              (39.3, 39.7, -79.4, -77.2, 0.3)]),
    (25, "MA", 7030, 14, 20, [(42.0, 42.7, -73.3, -70.5, 1.0)]),
    (26, "MI", 10077, 83, 147, [(42.0, 45.5, -86.2, -82.8, 0.96),
                                (45.8, 47.2, -89.5, -84.5, 0.04)]),
    (27, "MN", 5706, 87, 206, [(43.6, 48.5, -96.6, -92.0, 1.0)]),
    (28, "MS", 2961, 82, 121, [(30.8, 34.8, -91.0, -88.3, 1.0)]),
    (29, "MO", 6155, 114, 178, [(36.7, 40.4, -94.5, -90.3, 1.0)]),
    (30, "MT", 1084, 56, 377, [(45.2, 48.6, -115.5, -104.5, 1.0)]),
    (31, "NE", 1962, 93, 199, [(40.1, 42.8, -103.5, -96.0, 1.0)]),
    (32, "NV", 3105, 17, 284, [(36.0, 41.8, -119.5, -114.5, 1.0)]),
    (33, "NH", 1378, 10, 23, [(42.8, 44.8, -72.4, -71.0, 1.0)]),
    (34, "NJ", 9289, 21, 19, [(39.2, 41.2, -75.3, -74.1, 1.0)]),
    (35, "NM", 2118, 33, 314, [(31.8, 36.8, -108.8, -103.3, 1.0)]),
    (36, "NY", 20201, 62, 122, [(40.8, 43.3, -79.5, -73.5, 0.85),
                                (43.3, 44.8, -75.8, -73.5, 0.15)]),
    (37, "NC", 10439, 100, 126, [(34.2, 36.4, -83.8, -76.3, 1.0)]),
    (38, "ND", 779, 53, 178, [(46.0, 48.8, -103.7, -97.0, 1.0)]),
    (39, "OH", 11799, 88, 106, [(38.8, 41.6, -84.7, -80.8, 1.0)]),
    (40, "OK", 3959, 77, 177, [(34.0, 36.8, -99.9, -94.6, 1.0)]),
    (41, "OR", 4237, 36, 249, [(42.2, 45.8, -123.5, -120.5, 0.6),
                               (42.5, 45.5, -120.5, -117.2, 0.4)]),
    (42, "PA", 13003, 67, 115, [(39.8, 41.9, -80.4, -75.2, 1.0)]),
    (44, "RI", 1097, 5, 2.7, [(41.4, 41.9, -71.7, -71.2, 1.0)]),
    (45, "SC", 5118, 46, 77, [(32.3, 35.0, -82.8, -79.3, 1.0)]),
    (46, "SD", 887, 66, 196, [(43.0, 45.8, -103.8, -96.7, 1.0)]),
    (47, "TN", 6910, 95, 106, [(35.1, 36.5, -89.8, -82.2, 1.0)]),
    (48, "TX", 29146, 254, 676, [(26.0, 30.0, -99.5, -96.0, 0.25),
                                 (29.0, 33.5, -101.5, -94.2, 0.55),
                                 (31.5, 36.2, -103.0, -100.0, 0.15),
                                 (31.0, 31.9, -106.4, -103.2, 0.05)]),
    (49, "UT", 3272, 29, 213, [(37.2, 41.6, -113.8, -109.3, 1.0)]),
    (50, "VT", 643, 14, 24, [(43.0, 44.9, -73.3, -71.7, 1.0)]),
    (51, "VA", 8631, 133, 102, [(36.6, 38.8, -80.0, -76.4, 0.8),
                                (36.8, 37.6, -82.8, -80.2, 0.2)]),
    (53, "WA", 7705, 39, 172, [(45.8, 48.6, -123.8, -120.8, 0.65),
                               (46.0, 48.4, -120.5, -117.2, 0.35)]),
    (54, "WV", 1794, 55, 62, [(37.5, 40.2, -81.8, -78.2, 1.0)]),
    (55, "WI", 5894, 72, 140, [(42.6, 44.6, -92.2, -87.9, 0.8),
                                (44.6, 46.3, -92.5, -88.5, 0.2)]),
    (56, "WY", 577, 23, 251, [(41.2, 44.8, -110.8, -104.3, 1.0)]),
]

# metro anchor, state fips, lat, lon, state-side population (thousands)
METROS = [
    ("New York", 36, 40.71, -74.01, 13000),
    ("Long Island", 36, 40.79, -73.13, 2870),
    ("Buffalo", 36, 42.89, -78.88, 1160),
    ("Rochester", 36, 43.16, -77.61, 1070),
    ("Albany", 36, 42.65, -73.76, 900),
    ("Syracuse", 36, 43.05, -76.15, 650),
    ("Newark", 34, 40.74, -74.17, 6700),
    ("Trenton-Camden", 34, 39.95, -74.95, 1420),
    ("Los Angeles", 6, 34.05, -118.24, 13200),
    ("San Francisco-Oakland", 6, 37.77, -122.42, 4700),
    ("Riverside-San Bernardino", 6, 33.95, -117.40, 4600),
    ("San Diego", 6, 32.72, -117.16, 3300),
    ("Sacramento", 6, 38.58, -121.49, 2400),
    ("San Jose", 6, 37.34, -121.89, 2000),
    ("Fresno", 6, 36.74, -119.79, 1000),
    ("Bakersfield", 6, 35.37, -119.02, 910),
    ("Stockton", 6, 37.96, -121.29, 790),
    ("Chicago", 17, 41.88, -87.63, 9100),
    ("Metro East St. Louis", 17, 38.62, -90.15, 700),
    ("Rockford", 17, 42.27, -89.09, 340),
    ("Dallas-Fort Worth", 48, 32.78, -96.80, 7640),
    ("Houston", 48, 29.76, -95.37, 7120),
    ("San Antonio", 48, 29.42, -98.49, 2560),
    ("Austin", 48, 30.27, -97.74, 2280),
    ("McAllen", 48, 26.20, -98.23, 870),
    ("El Paso", 48, 31.76, -106.49, 870),
    ("Corpus Christi", 48, 27.80, -97.40, 420),
    ("Lubbock", 48, 33.58, -101.86, 320),
    ("Philadelphia", 42, 39.95, -75.17, 4100),
    ("Pittsburgh", 42, 40.44, -79.99, 2320),
    ("Harrisburg", 42, 40.27, -76.88, 590),
    ("Allentown", 42, 40.60, -75.47, 860),
    ("Scranton", 42, 41.41, -75.66, 560),
    ("Miami-Fort Lauderdale", 12, 25.77, -80.19, 6140),
    ("Tampa", 12, 27.95, -82.46, 3190),
    ("Orlando", 12, 28.54, -81.38, 2610),
    ("Jacksonville", 12, 30.33, -81.66, 1600),
    ("Sarasota", 12, 27.34, -82.53, 840),
    ("Fort Myers", 12, 26.64, -81.87, 790),
    ("Lakeland", 12, 28.04, -81.95, 730),
    ("Deltona-Daytona", 12, 29.02, -81.30, 670),
    ("Palm Bay", 12, 28.04, -80.62, 610),
    ("Atlanta", 13, 33.75, -84.39, 6090),
    ("Augusta", 13, 33.47, -82.01, 460),
    ("Savannah", 13, 32.08, -81.09, 400),
    ("Columbus GA", 13, 32.46, -84.99, 330),
    ("Boston", 25, 42.36, -71.06, 4900),
    ("Springfield MA", 25, 42.10, -72.59, 700),
    ("Detroit", 26, 42.33, -83.05, 4320),
    ("Grand Rapids", 26, 42.96, -85.66, 1090),
    ("Lansing", 26, 42.73, -84.56, 540),
    ("Flint", 26, 43.01, -83.69, 400),
    ("Phoenix", 4, 33.45, -112.07, 4860),
    ("Tucson", 4, 32.22, -110.97, 1040),
    ("Seattle", 53, 47.61, -122.33, 4020),
    ("Portland WA side", 53, 45.63, -122.67, 530),
    ("Spokane", 53, 47.66, -117.43, 580),
    ("Minneapolis-St. Paul", 27, 44.98, -93.27, 3690),
    ("Washington VA side", 51, 38.85, -77.30, 3100),
    ("Virginia Beach-Norfolk", 51, 36.85, -76.29, 1800),
    ("Richmond", 51, 37.54, -77.44, 1310),
    ("Washington MD side", 24, 38.99, -77.03, 2450),
    ("Baltimore", 24, 39.29, -76.61, 2840),
    ("Washington DC", 11, 38.91, -77.04, 690),
    ("Denver", 8, 39.74, -104.99, 2970),
    ("Colorado Springs", 8, 38.83, -104.82, 760),
    ("St. Louis", 29, 38.63, -90.20, 2100),
    ("Kansas City MO side", 29, 39.10, -94.58, 1220),
    ("Springfield MO", 29, 37.21, -93.29, 470),
    ("Charlotte", 37, 35.23, -80.84, 2400),
    ("Raleigh", 37, 35.78, -78.64, 1420),
    ("Greensboro", 37, 36.07, -79.79, 780),
    ("Durham", 37, 35.99, -78.90, 650),
    ("Winston-Salem", 37, 36.10, -80.24, 680),
    ("Cleveland", 39, 41.50, -81.69, 2090),
    ("Columbus OH", 39, 39.96, -83.00, 2140),
    ("Cincinnati", 39, 39.10, -84.51, 1750),
    ("Dayton", 39, 39.76, -84.19, 810),
    ("Akron", 39, 41.08, -81.52, 700),
    ("Toledo", 39, 41.65, -83.54, 640),
    ("Las Vegas", 32, 36.17, -115.14, 2270),
    ("Reno", 32, 39.53, -119.81, 490),
    ("Salt Lake City", 49, 40.76, -111.89, 1260),
    ("Provo", 49, 40.23, -111.66, 670),
    ("Ogden", 49, 41.22, -111.97, 690),
    ("Milwaukee", 55, 43.04, -87.91, 1570),
    ("Madison", 55, 43.07, -89.40, 680),
    ("Indianapolis", 18, 39.77, -86.16, 2110),
    ("Fort Wayne", 18, 41.08, -85.14, 420),
    ("Northwest Indiana", 18, 41.59, -87.35, 700),
    ("Nashville", 47, 36.16, -86.78, 1930),
    ("Memphis", 47, 35.15, -90.05, 1140),
    ("Knoxville", 47, 35.96, -83.92, 890),
    ("Chattanooga", 47, 35.05, -85.31, 570),
    ("Jersey-less Hartford", 9, 41.77, -72.67, 1210),
    ("Bridgeport-Stamford", 9, 41.18, -73.19, 960),
    ("New Haven", 9, 41.31, -72.92, 860),
    ("Portland OR", 41, 45.52, -122.68, 2220),
    ("Eugene", 41, 44.05, -123.09, 380),
    ("Salem", 41, 44.94, -123.04, 430),
    ("Oklahoma City", 40, 35.47, -97.52, 1430),
    ("Tulsa", 40, 36.15, -95.99, 1010),
    ("Louisville", 21, 38.25, -85.76, 1100),
    ("Lexington", 21, 38.04, -84.50, 520),
    ("Cincinnati KY side", 21, 39.05, -84.50, 450),
    ("New Orleans", 22, 29.95, -90.07, 1270),
    ("Baton Rouge", 22, 30.45, -91.15, 870),
    ("Shreveport", 22, 32.52, -93.75, 390),
    ("Birmingham", 1, 33.52, -86.81, 1110),
    ("Huntsville", 1, 34.73, -86.59, 490),
    ("Mobile", 1, 30.69, -88.04, 430),
    ("Montgomery", 1, 32.38, -86.31, 390),
    ("Greenville SC", 45, 34.85, -82.40, 930),
    ("Columbia SC", 45, 34.00, -81.03, 830),
    ("Charleston SC", 45, 32.78, -79.93, 800),
    ("Kansas City KS side", 20, 39.11, -94.63, 920),
    ("Wichita", 20, 37.69, -97.34, 650),
    ("Omaha", 31, 41.26, -95.93, 850),
    ("Lincoln", 31, 40.81, -96.70, 340),
    ("Des Moines", 19, 41.59, -93.62, 710),
    ("Cedar Rapids", 19, 41.98, -91.67, 280),
    ("Davenport", 19, 41.52, -90.58, 380),
    ("Little Rock", 5, 34.75, -92.29, 750),
    ("Jackson MS", 28, 32.30, -90.18, 590),
    ("Gulfport", 28, 30.37, -89.09, 420),
    ("Albuquerque", 35, 35.08, -106.65, 920),
    ("Boise", 16, 43.62, -116.21, 760),
    ("Providence", 44, 41.82, -71.41, 1000),
    ("Manchester NH", 33, 42.99, -71.46, 420),
    ("Portland ME", 23, 43.66, -70.26, 550),
    ("Charleston WV", 54, 38.35, -81.63, 260),
    ("Wilmington DE", 10, 39.74, -75.55, 570),
    ("Fargo", 38, 46.88, -96.79, 250),
    ("Sioux Falls", 46, 43.54, -96.73, 270),
    ("Billings", 30, 45.78, -108.50, 180),
    ("Burlington VT", 50, 44.48, -73.21, 220),
    ("Cheyenne", 56, 41.14, -104.82, 100),
]

# metro split into clustered counties: share of metro population per county
_SPLIT_SHARES = [0.42, 0.25, 0.15, 0.09, 0.053, 0.037]


def _n_split(pop_k: float) -> int:
    if pop_k >= 8000:
        return 6
    if pop_k >= 4000:
        return 5
    if pop_k >= 2000:
        return 4
    if pop_k >= 900:
        return 3
    if pop_k >= 400:
        return 2
    return 1


def build_rows():
    rng = np.random.default_rng(SEED)
    rows = []
    metros_by_state = {}
    for name, fips, lat, lon, pop in METROS:
        metros_by_state.setdefault(fips, []).append((name, lat, lon, pop))

    for fips, abbr, pop_k, n_counties, area_kkm2, boxes in STATES:
        area = area_kkm2 * 1000.0
        metro_list = metros_by_state.get(fips, [])
        metro_total = sum(m[3] for m in metro_list)
        scale = min(1.0, 0.93 * pop_k / metro_total) if metro_total else 1.0

        county_records = []  # (lat, lon, pop_thousands, area)
        for name, lat, lon, mpop in metro_list:
            mpop *= scale
            k = min(_n_split(mpop), max(1, n_counties // 2))
            shares = np.array(_SPLIT_SHARES[:k])
            shares = shares / shares.sum()
            angles = rng.uniform(0.0, 2.0 * np.pi, size=k)
            radii_km = np.concatenate([[0.0], rng.uniform(18.0, 42.0, size=k - 1)])
            for j in range(k):
                dlat = radii_km[j] * np.cos(angles[j]) / 111.0
                dlon = radii_km[j] * np.sin(angles[j]) / (111.0 * np.cos(np.radians(lat)))
                c_area = float(rng.uniform(900.0, 2600.0))
                county_records.append((lat + dlat, lon + dlon,
                                       mpop * shares[j], c_area))

        n_rural = n_counties - len(county_records)
        rural_pop = max(pop_k - sum(r[2] for r in county_records), 0.02 * pop_k)
        if n_rural > 0:
            box_weights = np.array([b[4] for b in boxes], dtype=float)
            box_weights = box_weights / box_weights.sum()
            box_idx = rng.choice(len(boxes), size=n_rural, p=box_weights)
            raw = rng.lognormal(mean=0.0, sigma=0.85, size=n_rural)
            pops = raw / raw.sum() * rural_pop
            metro_area = sum(r[3] for r in county_records)
            rural_area = max(area - metro_area, 400.0 * n_rural) / n_rural
            for j in range(n_rural):
                b = boxes[box_idx[j]]
                lat = float(rng.uniform(b[0], b[1]))
                lon = float(rng.uniform(b[2], b[3]))
                c_area = float(rural_area * rng.uniform(0.55, 1.45))
                county_records.append((lat, lon, float(pops[j]), c_area))

        order = rng.permutation(len(county_records))
        for seq, idx in enumerate(order):
            lat, lon, pop_thousands, c_area = county_records[idx]
            code = f"{fips:02d}{2 * seq + 1:03d}"
            rows.append((code, f"{abbr}-{2 * seq + 1:03d}",
                         round(lat, 4), round(lon, 4),
                         int(round(pop_thousands * 1000.0)),
                         round(c_area, 1)))
    rows.sort(key=lambda r: r[0])
    return rows


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parents[1] / "src" / "peeringsim" / "data" / "us_counties.csv")
    rows = build_rows()
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["fips", "name", "lat", "lon", "population", "land_area_km2"])
        writer.writerows(rows)
    total = sum(r[4] for r in rows)
    print(f"wrote {len(rows)} counties, total population {total:,} -> {out}")


if __name__ == "__main__":
    main()
