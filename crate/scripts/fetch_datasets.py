#!/usr/bin/env python3
"""Prepare the benchmark CSVs under data/.

Sources (all fetched from the Python package index; set PIP_INDEX_URL for a mirror):

* Congressional voting records (UCI "house-votes-84"): shipped as
  Orange/datasets/voting.tab in the Orange3 3.3.10 sdist.
* Wisconsin breast cancer (Mangasarian & Wolberg, 699 x 9): MASS::biopsy as
  bundled by the `rdatasets` wheel.
* Brain tumours (Pomeroy et al. 2002, 42 x 1379 after filtering): the
  "pomeroy-2002-v2" table of the de Souto et al. (2008) cancer gene
  expression clustering benchmark. It is not on PyPI; place the downloaded
  `pomeroy-2002-v2_database.txt` next to this script and rerun.

Preprocessing:
* voting: drop legislators with any missing vote; yea=1, nay=0.
* breast cancer: drop records with a missing attribute.
* brain: samples as rows, genes as columns, values as published.

Each dataset is written as data/<name>.csv (numeric, with header) and
data/<name>_labels.csv (one label per row, with header).
"""
import csv
import io
import lzma
import os
import re
import tarfile
import tempfile
import time
import urllib.error
import urllib.parse
import urllib.request
import zipfile

import pandas as pd

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")
ORANGE_SDIST = "Orange3-3.3.10.tar.gz"
RDATASETS_WHEEL = "rdatasets-0.2.10-py3-none-any.whl"
INDEX = os.environ.get("PIP_INDEX_URL", "https://pypi.org/simple").rstrip("/")


def write(name, frame, labels):
    frame.to_csv(os.path.join(DATA, f"{name}.csv"), index=False, float_format="%.10g")
    with open(os.path.join(DATA, f"{name}_labels.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"])
        for lab in labels:
            w.writerow([lab])
    print(f"{name}: {frame.shape[0]} x {frame.shape[1]}")


def fetch(url, tries=5):
    # the index rate-limits and occasionally stalls; back off and retry
    for attempt in range(tries):
        try:
            return urllib.request.urlopen(url, timeout=120).read()
        except (urllib.error.URLError, TimeoutError) as err:
            transient = not isinstance(err, urllib.error.HTTPError) or err.code in (429, 503)
            if not transient or attempt == tries - 1:
                raise
            time.sleep(30 * (attempt + 1))


def from_index(project, filename, dest):
    # pip will not download an sdist whose metadata it cannot build, so read
    # the simple index page and fetch the archive directly
    page_url = f"{INDEX}/{project}/"
    page = fetch(page_url).decode()
    for href in re.findall(r'href="([^"]+)"', page):
        url = urllib.parse.urljoin(page_url, href)
        if urllib.parse.urlparse(url).path.endswith("/" + filename):
            path = os.path.join(dest, filename)
            with open(path, "wb") as fh:
                fh.write(fetch(url.split("#")[0]))
            return path
    raise SystemExit(f"{filename} not listed at {page_url}")


def voting(tmp):
    with tarfile.open(from_index("orange3", ORANGE_SDIST, tmp)) as tar:
        member = next(m for m in tar.getmembers() if m.name.endswith("Orange/datasets/voting.tab"))
        text = tar.extractfile(member).read().decode()
    rows = [line.split("\t") for line in text.splitlines()]
    header, body = rows[0], rows[3:]
    frame = pd.DataFrame(body, columns=header)
    frame = frame.replace("", pd.NA).dropna()
    labels = frame.pop("party").tolist()
    frame = frame.apply(lambda col: (col == "y").astype(int))
    write("congress_voting", frame, labels)


def breast_cancer(tmp):
    wheel = from_index("rdatasets", RDATASETS_WHEEL, tmp)
    raw = zipfile.ZipFile(wheel).read("rdatasets/_data/MASS/biopsy.pkl.compress")
    frame = pd.read_pickle(io.BytesIO(lzma.decompress(raw))).dropna()
    labels = frame["class"].tolist()
    frame = frame[[f"V{i}" for i in range(1, 10)]].astype(int)
    write("breast_cancer", frame, labels)


def brain():
    src = os.path.join(HERE, "pomeroy-2002-v2_database.txt")
    if not os.path.exists(src):
        print("brain_tumours: source table missing, skipped")
        return
    table = pd.read_csv(src, sep="\t", index_col=0)
    labels = table.iloc[0].tolist()
    frame = table.iloc[1:].astype(float).T
    write("brain_tumours", frame, labels)


if __name__ == "__main__":
    os.makedirs(DATA, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        voting(tmp)
    with tempfile.TemporaryDirectory() as tmp:
        breast_cancer(tmp)
    brain()
