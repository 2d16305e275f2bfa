"""Readers and writers for dataset, sample, trace and summary files.

Dataset CSV schemas (UTF-8, comma separated, LF line endings):

* high:   ``contacts,cases,households`` - one row per outcome
* medium: ``stratum,contacts_total,cases_total`` - one row per household
  contact count, optionally with a ``households`` column that is checked
  against ``contacts_total / stratum``
* low:    ``households,contacts,cases`` - a single row

The level is recognised from the header.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .datasets import HighInfoDataset, LowInfoDataset, MediumInfoDataset
from .enumeration import DEFAULT_MAX_CONTACTS, cases_of, contacts_of
from .errors import DomainError
from .mcmc import ChainResult, PosteriorSamples

HIGH_HEADER = ["contacts", "cases", "households"]
MEDIUM_HEADER = ["stratum", "contacts_total", "cases_total"]
LOW_HEADER = ["households", "contacts", "cases"]


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _int(value: str, where: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise DomainError(f"{where}: expected an integer, got {value!r}") from None


def detect_level(header: list[str]) -> str:
    cols = [h.strip() for h in header]
    if cols[:3] == HIGH_HEADER:
        return "high"
    if cols[:3] == MEDIUM_HEADER:
        return "medium"
    if cols[:3] == LOW_HEADER:
        return "low"
    raise DomainError(f"unrecognised dataset header {','.join(cols)!r}")


def read_dataset(path, m: int | None = None):
    """Read a dataset CSV (or JSON) file; ``m`` defaults to the largest
    contact count present (``5`` for low-information files)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _read_json_dataset(path, m)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(x.strip() for x in r)]
    level = detect_level(header)
    cols = [h.strip() for h in header]
    rows = [dict(zip(cols, (x.strip() for x in r))) for r in rows]
    where = str(path)
    if level == "high":
        outcomes = {}
        for i, r in enumerate(rows, start=2):
            n, z, h = (_int(r[c], f"{where}:{i}") for c in HIGH_HEADER)
            outcomes[(n, z)] = outcomes.get((n, z), 0) + h
        size = m if m is not None else max((n for n, _ in outcomes), default=1)
        return HighInfoDataset.from_outcomes(outcomes, size)
    if level == "medium":
        strata = {}
        for i, r in enumerate(rows, start=2):
            s = _int(r["stratum"], f"{where}:{i}")
            if s < 1 or s in strata:
                raise DomainError(f"{where}:{i}: invalid or repeated stratum {s}")
            n = _int(r["contacts_total"], f"{where}:{i}")
            z = _int(r["cases_total"], f"{where}:{i}")
            if r.get("households"):
                h = _int(r["households"], f"{where}:{i}")
                if h * s != n:
                    raise DomainError(
                        f"{where}:{i}: {h} households of {s} contacts disagree with "
                        f"contacts_total={n}")
            strata[s] = (n, z)
        size = m if m is not None else max(strata, default=1)
        if strata and max(strata) > size:
            raise DomainError(f"{where}: stratum {max(strata)} exceeds max contacts {size}")
        n_vec = [strata.get(i, (0, 0))[0] for i in range(1, size + 1)]
        z_vec = [strata.get(i, (0, 0))[1] for i in range(1, size + 1)]
        return MediumInfoDataset(size, n_vec, z_vec)
    if len(rows) != 1:
        raise DomainError(f"{where}: low-information file must have exactly one data row")
    r = rows[0]
    return LowInfoDataset(*(_int(r[c], where) for c in LOW_HEADER),
                          m=m if m is not None else DEFAULT_MAX_CONTACTS)


def _read_json_dataset(path: Path, m: int | None):
    data = json.loads(path.read_text(encoding="utf-8"))
    level = data.get("level")
    size = m if m is not None else data.get("m")
    if level == "high":
        outcomes = {(int(n), int(z)): int(h) for n, z, h in data["outcomes"]}
        size = size or max((n for n, _ in outcomes), default=1)
        return HighInfoDataset.from_outcomes(outcomes, size)
    if level == "medium":
        return MediumInfoDataset(size or len(data["contacts_by_size"]),
                                 data["contacts_by_size"], data["cases_by_size"])
    if level == "low":
        return LowInfoDataset(data["households"], data["contacts"], data["cases"],
                              m=size or DEFAULT_MAX_CONTACTS)
    raise DomainError(f"{path}: unknown dataset level {level!r}")


def write_dataset(dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        if isinstance(dataset, HighInfoDataset):
            w.writerow(HIGH_HEADER)
            cn, cz = contacts_of(dataset.m), cases_of(dataset.m)
            for k, h in enumerate(dataset.counts):
                w.writerow([int(cn[k]), int(cz[k]), int(h)])
        elif isinstance(dataset, MediumInfoDataset):
            w.writerow(MEDIUM_HEADER)
            for i in range(dataset.m):
                w.writerow([i + 1, int(dataset.contacts_by_size[i]), int(dataset.cases_by_size[i])])
        elif isinstance(dataset, LowInfoDataset):
            w.writerow(LOW_HEADER)
            w.writerow(list(dataset.as_tuple()))
        else:
            raise DomainError(f"cannot write {type(dataset).__name__}")


def embed(dataset, m: int):
    """Re-express a dataset with a larger maximum contact count."""
    if dataset.m == m:
        return dataset
    if dataset.m > m:
        raise DomainError(f"dataset has households with up to {dataset.m} contacts, "
                          f"more than m={m}")
    if isinstance(dataset, HighInfoDataset):
        return HighInfoDataset.from_outcomes(dataset.outcomes(), m)
    if isinstance(dataset, MediumInfoDataset):
        pad = np.zeros(m - dataset.m, dtype=np.int64)
        return MediumInfoDataset(m, np.concatenate([dataset.contacts_by_size, pad]),
                                 np.concatenate([dataset.cases_by_size, pad]))
    return LowInfoDataset(*dataset.as_tuple(), m=m)


def max_contacts_present(dataset) -> int:
    if isinstance(dataset, HighInfoDataset):
        nz = np.flatnonzero(dataset.counts)
        return int(contacts_of(dataset.m)[nz].max()) if len(nz) else 1
    if isinstance(dataset, MediumInfoDataset):
        nz = np.flatnonzero(dataset.contacts_by_size)
        return int(nz.max()) + 1 if len(nz) else 1
    return dataset.m


# ---------------------------------------------------------------------------
# Chain outputs

def samples_header(m: int) -> list[str]:
    return ["iteration", "beta", "eta", "log_target"] + [f"N_{n}" for n in range(1, m + 1)]


def write_samples(samples: PosteriorSamples, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(samples_header(samples.m))
        for i in range(len(samples)):
            w.writerow([int(samples.iteration[i]), repr(float(samples.beta[i])),
                        repr(float(samples.eta[i])), repr(float(samples.log_target[i]))]
                       + [int(x) for x in samples.strata[i]])


def read_samples(path) -> PosteriorSamples:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    m = len(header) - 4
    if header != samples_header(m):
        raise DomainError(f"{path}: not a samples file (header {','.join(header)!r})")
    if not rows:
        return PosteriorSamples(np.zeros(0, np.int64), np.zeros(0), np.zeros(0), np.zeros(0),
                                np.zeros((0, m), np.int64))
    arr = np.array(rows, dtype=object)
    return PosteriorSamples(arr[:, 0].astype(np.int64), arr[:, 1].astype(float),
                            arr[:, 2].astype(float), arr[:, 3].astype(float),
                            arr[:, 4:].astype(np.int64))


def write_trace(result: ChainResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["iteration", "beta", "eta", "log_target"])
        for i, (b, e, lt) in enumerate(zip(result.beta_trace, result.eta_trace,
                                           result.log_target_trace), start=1):
            w.writerow([i, repr(float(b)), repr(float(e)), repr(float(lt))])


def read_trace(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return {k: np.array([float(r[k]) for r in rows]) for k in ("iteration", "beta", "eta", "log_target")}


SAR_HEADER = ["size", "implied_mean", "implied_lower", "implied_upper",
              "observed", "observed_lower", "observed_upper"]


def write_sar(implied: dict, observed: dict | None, m: int, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(SAR_HEADER)
        for key in [str(n) for n in range(1, m + 1)] + ["overall"]:
            imp = implied[key]
            obs = (observed or {}).get(key)
            w.writerow([key, repr(imp["mean"]), repr(imp["lower"]), repr(imp["upper"])]
                       + ([repr(obs["estimate"]), repr(obs["lower"]), repr(obs["upper"])]
                          if obs else ["", "", ""]))


def read_sar(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


COVERAGE_HEADER = ["beta_true", "eta_true", "distribution", "alpha0", "replicates", "covered",
                   "coverage_pct", "binomial_ci_lo", "binomial_ci_hi"]


def write_coverage(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, COVERAGE_HEADER, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def read_coverage(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
