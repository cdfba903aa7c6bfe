"""Rebuild the checked-in CSVs from the original UCI / ProPublica files.

usage: python3 convert.py <dir containing adult/, compas/, german/>
"""
import csv
import sys
from pathlib import Path

src = Path(sys.argv[1])
here = Path(__file__).resolve().parent

ADULT_COLS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]

with open(here / "adult.csv", "w", newline="") as out:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(ADULT_COLS)
    for name in ("adult.data", "adult.test"):
        for line in open(src / "adult" / name):
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            cells = [c.strip() for c in line.split(",")]
            cells[-1] = cells[-1].rstrip(".")
            w.writerow(cells)

COMPAS_COLS = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree", "decile_score", "two_year_recid",
]
with open(src / "compas" / "compas-scores-two-years.csv") as f, open(here / "compas.csv", "w", newline="") as out:
    r = csv.reader(f)
    header = next(r)
    idx = [header.index(c) for c in COMPAS_COLS]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COMPAS_COLS)
    for row in r:
        w.writerow([row[i] for i in idx])

JOB = {"A171": "unskilled-nonresident", "A172": "unskilled-resident", "A173": "skilled", "A174": "highly-skilled"}
HOUSING = {"A151": "rent", "A152": "own", "A153": "free"}
SAVINGS = {"A61": "little", "A62": "moderate", "A63": "quite-rich", "A64": "rich", "A65": "unknown"}
CHECKING = {"A11": "little", "A12": "moderate", "A13": "rich", "A14": "none"}
PURPOSE = {
    "A40": "car-new", "A41": "car-used", "A42": "furniture", "A43": "radio-tv", "A44": "appliances",
    "A45": "repairs", "A46": "education", "A47": "vacation", "A48": "retraining", "A49": "business",
    "A410": "other",
}
SEX = {"A91": "male", "A92": "female", "A93": "male", "A94": "male", "A95": "female"}

with open(here / "german.csv", "w", newline="") as out:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["age", "sex", "job", "housing", "saving_accounts", "checking_account",
                "credit_amount", "duration", "purpose", "risk"])
    for line in open(src / "german" / "german.data"):
        c = line.split()
        if not c:
            continue
        w.writerow([c[12], SEX[c[8]], JOB[c[16]], HOUSING[c[14]], SAVINGS[c[5]], CHECKING[c[0]],
                    c[4], c[1], PURPOSE[c[3]], "good" if c[20] == "1" else "bad"])
