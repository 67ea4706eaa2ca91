"""Regenerates the synthetic fixtures in this directory.

Run from the repository root: python3 fixtures/generate.py
Output is fully determined by the seed.
"""
import csv
import datetime as dt
import json
import random

SEED = 20030101
HERE = "fixtures"

BOROUGHS = [
    "Barking and Dagenham", "Barnet", "Bexley", "Brent", "Bromley", "Camden",
    "Croydon", "Ealing", "Enfield", "Greenwich", "Hackney",
    "Hammersmith and Fulham", "Haringey", "Harrow", "Havering", "Hillingdon",
    "Hounslow", "Islington", "Kensington and Chelsea", "Kingston upon Thames",
    "Lambeth", "Lewisham", "Merton", "Newham", "Redbridge",
    "Richmond upon Thames", "Southwark", "Sutton", "Tower Hamlets",
    "Waltham Forest", "Wandsworth", "Westminster",
]
METHODS = [
    ("Blunt Implement", 0.11),
    ("Knife or Sharp Implement", 0.54),
    ("Physical Assault, no weapon", 0.20),
    ("Shooting", 0.15),
]


def pick(rng, weighted):
    r = rng.random()
    acc = 0.0
    for value, w in weighted:
        acc += w
        if r < acc:
            return value
    return weighted[-1][0]


def homicides(rng, n=2229):
    borough_w = [(b, 1.0 + (i % 5) * 0.35) for i, b in enumerate(BOROUGHS)]
    total = sum(w for _, w in borough_w)
    borough_w = [(b, w / total) for b, w in borough_w]
    start = dt.date(2003, 1, 1)
    span = (dt.date(2023, 12, 31) - start).days
    rows = []
    for _ in range(n):
        method = pick(rng, METHODS)
        female = rng.random() < (0.45 if method == "Physical Assault, no weapon" else 0.22)
        sex = "Female" if female else "Male"
        da_p = 0.55 if female else 0.07
        da = "Domestic Abuse" if rng.random() < da_p else "Not Domestic Abuse"
        solved_p = {
            "Shooting": 0.62,
            "Knife or Sharp Implement": 0.86,
            "Blunt Implement": 0.9,
            "Physical Assault, no weapon": 0.93,
        }[method]
        if da == "Domestic Abuse":
            solved_p = 0.985
        solved = "Solved" if rng.random() < solved_p else "Unsolved"
        borough = pick(rng, borough_w)
        date = start + dt.timedelta(days=rng.randrange(span + 1))
        rows.append([date.isoformat(), sex, method, da, solved, borough])
    return rows


def figure2():
    counts = {
        ("Blunt Implement", "Female"): (27, 3),
        ("Blunt Implement", "Male"): (28, 10),
        ("Knife or Sharp Implement", "Female"): (34, 3),
        ("Knife or Sharp Implement", "Male"): (36, 13),
        ("Physical Assault", "Female"): (78, 20),
        ("Physical Assault", "Male"): (112, 35),
    }
    rows = []
    for (method, sex), (solved, unsolved) in counts.items():
        rows += [[method, sex, "Solved"]] * solved
        rows += [[method, sex, "Unsolved"]] * unsolved
    return rows


def london():
    names = BOROUGHS + ["City of London"]
    features = []
    for i, name in enumerate(sorted(names)):
        col, row = i % 6, i // 6
        x0, y0 = -0.5 + col * 0.14, 51.30 + row * 0.07
        ring = [[x0, y0], [x0 + 0.13, y0], [x0 + 0.13, y0 + 0.06], [x0, y0 + 0.06], [x0, y0]]
        ring = [[round(x, 6), round(y, 6)] for x, y in ring]
        features.append({
            "type": "Feature",
            "properties": {"NAME": name, "GSS_CODE": f"E09{i + 1:06d}"},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    return {"type": "FeatureCollection", "features": features}


def write(path, header, rows):
    with open(f"{HERE}/{path}", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main():
    rng = random.Random(SEED)
    header = ["Date", "Sex", "Method_of_Killing", "Domestic_Abuse", "Solved_Status", "Borough"]
    rows = homicides(rng)
    write("homicides_like.csv", header, rows)
    write("homicides_head.csv", header, rows[:6])
    write("figure2.csv", ["Method", "Sex", "Solved"], figure2())
    with open(f"{HERE}/london_boroughs.geojson", "w") as f:
        json.dump(london(), f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
