#!/usr/bin/env python3
"""Generate the bundled 1-degree land/sea mask.

Continental outlines are coarse hand-digitized polygons (roughly 2-degree
fidelity, inland seas filled as land). Good enough to separate open-ocean
sampling positions from continents; not a navigation product.

Usage: gen_ocean_mask.py [OUT]   (default: data/masks/ocean_mask_1deg.txt)
"""

import sys
from pathlib import Path

ROWS, COLS = 180, 360
HEADER = ("# ocean-mask v1 rows=180 cols=360 "
          "origin=lat:90..-90,lon:-180..180 cell=1deg legend=1:ocean,0:land")

# (lon, lat) vertex rings.
LANDMASSES = {
    "north_america": [
        (-168, 66), (-160, 70), (-140, 70), (-125, 72), (-110, 73), (-95, 72),
        (-85, 70), (-75, 68), (-60, 60), (-65, 52), (-55, 50), (-60, 46),
        (-66, 44), (-70, 42), (-74, 40), (-75.5, 35), (-81, 31), (-80, 26),
        (-84, 30), (-90, 29), (-97, 26), (-97, 20), (-94, 16), (-83, 8),
        (-80, 7), (-78, 7), (-84, 10), (-92, 14), (-97, 16), (-106, 22),
        (-110, 24), (-114, 28), (-120, 33), (-124, 38), (-124, 43), (-125, 48),
        (-132, 55), (-140, 59), (-152, 58), (-158, 56), (-165, 60),
    ],
    "south_america": [
        (-78, 7), (-70, 12), (-60, 10), (-52, 5), (-50, 0), (-44, -2),
        (-35, -5), (-34, -8), (-38, -15), (-40, -22), (-48, -28), (-53, -34),
        (-58, -39), (-62, -41), (-65, -45), (-68, -50), (-68, -55), (-72, -54),
        (-75, -50), (-73, -44), (-71, -37), (-70, -30), (-70, -18), (-75, -15),
        (-81, -6), (-80, 0), (-77, 4),
    ],
    "greenland": [
        (-73, 78), (-58, 76), (-40, 84), (-20, 82), (-22, 70), (-42, 60),
        (-48, 61), (-54, 67), (-68, 72),
    ],
    "africa": [
        (-17, 15), (-17, 21), (-10, 31), (-6, 35), (10, 37), (11, 33),
        (20, 32), (32, 31), (35, 28), (43, 11), (51, 12), (40, -3), (35, -20),
        (30, -31), (20, -35), (18, -33), (12, -18), (9, -1), (9, 4), (-8, 4),
        (-13, 9),
    ],
    "eurasia": [
        (-5.5, 36.2), (0, 38.5), (3, 42.5), (9, 44.2), (12, 37.5), (18, 40),
        (21, 37), (26, 38.5), (36, 36.3), (34.8, 31.8), (32.3, 30.8),
        (35, 28), (39, 20.5), (43.3, 12.6), (45, 11.8), (53, 16.8),
        (59.8, 22.3), (56.3, 26.8), (61, 25.2), (66.5, 24.8), (72, 20.8),
        (73, 16), (77.5, 8.2), (80.3, 13.5), (87, 21.5), (91.8, 22.3),
        (94, 16), (98.3, 7.8), (100.5, 2.5), (103.6, 1.2), (102.5, 6),
        (100.3, 13.4), (106.5, 10.5), (109.3, 13), (105.8, 19.8), (108, 21.5),
        (110.3, 20.3), (113.5, 22.2), (117, 23.5), (120.5, 28), (121.5, 32),
        (126.5, 34.5), (129.3, 35.2), (129.5, 38), (131.5, 43), (138, 49),
        (141.5, 52), (150, 59), (156.8, 50.9), (162, 56), (170, 60),
        (180, 65), (180, 68), (170, 70), (140, 72), (128, 73), (110, 77),
        (100, 77.5), (80, 73), (68, 69), (60, 69.5), (44, 67), (33, 69.5),
        (26, 71), (15, 68.5), (5, 62), (6, 58), (8, 55), (5, 53.5), (4, 52),
        (1.5, 51), (0, 49.8), (-4.8, 48.4), (-1.2, 45.5), (-2, 43.5),
        (-9.3, 43.5), (-9.5, 38.5), (-6, 36.3),
    ],
    "british_isles": [
        (-10, 51.5), (-5.5, 50), (1.5, 51), (0.5, 53), (-2, 56), (-4, 58.5),
        (-7, 58), (-10, 54),
    ],
    "iceland": [
        (-24, 64), (-21, 66.5), (-14, 66), (-13.5, 64.5), (-18, 63.3),
    ],
    "japan": [
        (130, 31), (132, 34), (137, 35), (140, 36), (141.5, 40), (142, 45),
        (145, 44.5), (141, 38.5), (136, 33.5), (131, 30.5),
    ],
    "sumatra": [
        (95, 5.5), (98, 3.5), (106, -3), (105, -6), (102, -5), (95, 2),
    ],
    "borneo": [
        (108.8, 1.5), (112, 3), (117, 7), (119, 1), (116, -4), (110, -2.5),
    ],
    "new_guinea": [
        (131, -0.5), (141, -2.5), (148, -8), (151, -10), (147, -10),
        (138, -8), (132, -4),
    ],
    "australia": [
        (113.5, -24), (115, -34), (124, -33), (132, -32), (140, -38),
        (146, -39), (150, -37), (153, -30), (153, -25), (146, -19),
        (142, -11), (136, -12), (131, -12), (126, -14), (122, -17),
        (114, -22),
    ],
    "new_zealand": [
        (166.5, -46), (170, -41), (174, -35), (178.5, -37.5), (174.5, -42),
        (169, -47),
    ],
    "madagascar": [
        (44, -25.5), (47.5, -25), (50.5, -16), (49, -12.5), (46, -16),
    ],
    "antarctic_peninsula": [
        (-65, -70), (-60, -63), (-57, -63.5), (-62, -70),
    ],
}


def point_in_ring(lon, lat, ring):
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > lat) != (y2 > lat):
            x_cross = x1 + (lat - y1) * (x2 - x1) / (y2 - y1)
            if lon < x_cross:
                inside = not inside
    return inside


def is_land(lat, lon):
    if lat < -70:
        return True
    return any(point_in_ring(lon, lat, ring) for ring in LANDMASSES.values())


def build_rows():
    rows = []
    for row in range(ROWS):
        lat_c = 90.0 - row - 0.5
        cells = []
        for col in range(COLS):
            lon_c = col - 180.0 + 0.5
            cells.append("0" if is_land(lat_c, lon_c) else "1")
        rows.append("".join(cells))
    return rows


def cell(rows, lat, lon):
    row = min(max(int(90.0 - lat), 0), ROWS - 1)
    col = min(max(int(lon + 180.0), 0), COLS - 1)
    return rows[row][col]


def check(rows):
    ocean_points = [
        (40.0, -30.0),    # mid-Atlantic
        (36.5, -64.0),    # Sargasso Sea station
        (35.0, -70.0), (35.5, -68.0), (36.0, -66.0),
        (37.0, -62.0), (37.5, -60.0),  # western North Atlantic transect
        (28.0, 122.5), (30.25, 124.75),  # East China Sea stations
        (-30.5, -25.0), (-32.0, -20.0), (-34.25, -15.5),
        (-36.0, -10.0), (-38.5, -5.25),  # South Atlantic section
        (0.0, -150.0),    # equatorial Pacific
        (-55.0, 100.0),   # Southern Ocean
    ]
    land_points = [
        (47.0, 2.5),      # France
        (40.0, -100.0),   # central North America
        (-15.0, -55.0),   # Brazil
        (55.0, 80.0),     # Siberia
        (5.0, 20.0),      # central Africa
        (-25.0, 135.0),   # central Australia
        (-80.0, 0.0),     # Antarctica
    ]
    for lat, lon in ocean_points:
        assert cell(rows, lat, lon) == "1", f"expected ocean at {lat},{lon}"
    for lat, lon in land_points:
        assert cell(rows, lat, lon) == "0", f"expected land at {lat},{lon}"


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "data" / "masks" / "ocean_mask_1deg.txt")
    rows = build_rows()
    check(rows)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(HEADER + "\n" + "\n".join(rows) + "\n")
    ocean = sum(r.count("1") for r in rows)
    print(f"wrote {out} ({ocean} ocean cells of {ROWS * COLS})")


if __name__ == "__main__":
    main()
