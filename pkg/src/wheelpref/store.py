"""File-backed artifact store: one directory tree, no database.

Layout under the root:

    designs/              PGM images plus manifest.csv (generate step)
    features.csv          morphology + performance features per design
    pca.json              double min-max + PCA label artifacts
    labels.csv            4-dim PC labels per design
    vae.json              trained VAE checkpoint
    vae_log.csv           VAE training curve
    responses.jsonl       append-only ranking journal, one JSON object per line
    respondents/          one JSON record per respondent (demographics + plan)
    models/               per-respondent choice model checkpoints
    ensembles/            per-respondent ensemble weights
    utility.csv           shared utility matrix over the design pool
    truth.json            simulator ground truth (survey-sim runs only)
    reports/              recommendation / clustering / eval outputs

The journal is the only mutable artifact: lines are appended one at a time
and the latest line per (respondent, question) wins. A partial trailing
line (torn write from a crash) is discarded on read; a malformed line
anywhere else means real corruption and raises.
"""

import csv
import json
import os

import numpy as np

from . import pgm, wheel_gen


class StoreError(RuntimeError):
    pass


FEATURE_COLUMNS = ["symmetry_count", "skeleton_length", "closed_spaces",
                   "joints", "joint_branches",
                   "compliance_normal", "compliance_shear",
                   "volume_fraction", "weight"]
LABEL_COLUMNS = ["pc1", "pc2", "pc3", "pc4"]


class Store:
    def __init__(self, root):
        self.root = root
        self.designs_dir = os.path.join(root, "designs")
        self.manifest_path = os.path.join(self.designs_dir, "manifest.csv")
        self.features_path = os.path.join(root, "features.csv")
        self.pca_path = os.path.join(root, "pca.json")
        self.labels_path = os.path.join(root, "labels.csv")
        self.vae_path = os.path.join(root, "vae.json")
        self.vae_log_path = os.path.join(root, "vae_log.csv")
        self.responses_path = os.path.join(root, "responses.jsonl")
        self.respondents_dir = os.path.join(root, "respondents")
        self.models_dir = os.path.join(root, "models")
        self.ensembles_dir = os.path.join(root, "ensembles")
        self.utility_path = os.path.join(root, "utility.csv")
        self.truth_path = os.path.join(root, "truth.json")
        self.reports_dir = os.path.join(root, "reports")
        self.eval_path = os.path.join(root, "reports", "eval.csv")

    def ensure_dirs(self):
        for d in (self.root, self.designs_dir, self.respondents_dir,
                  self.models_dir, self.ensembles_dir, self.reports_dir):
            os.makedirs(d, exist_ok=True)

    # -- designs -----------------------------------------------------------

    def design_rows(self):
        return wheel_gen.load_manifest(self.manifest_path)

    def design_path(self, rows_by_id, design_id):
        return os.path.join(self.designs_dir, rows_by_id[design_id]["path"])

    def load_designs(self):
        """All design images keyed by id, pixels as float arrays in [0, 1]."""
        images = {}
        for row in self.design_rows():
            path = os.path.join(self.designs_dir, row["path"])
            images[row["id"]] = pgm.read_pgm(path)
        return images

    # -- feature / label tables ---------------------------------------------

    def write_features(self, ids, X):
        X = np.asarray(X, dtype=np.float64)
        with open(self.features_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id"] + FEATURE_COLUMNS)
            for design_id, row in zip(ids, X):
                writer.writerow([design_id] + [repr(float(v)) for v in row])

    def read_features(self):
        ids, rows = self._read_table(self.features_path, FEATURE_COLUMNS)
        return ids, rows

    def write_labels(self, ids, Y):
        Y = np.asarray(Y, dtype=np.float64)
        with open(self.labels_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id"] + LABEL_COLUMNS)
            for design_id, row in zip(ids, Y):
                writer.writerow([design_id] + [repr(float(v)) for v in row])

    def read_labels(self):
        ids, rows = self._read_table(self.labels_path, LABEL_COLUMNS)
        return {design_id: row for design_id, row in zip(ids, rows)}

    def _read_table(self, path, columns):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["id"] + columns:
                raise StoreError(f"{path}: unexpected header {header}")
            ids, rows = [], []
            for row in reader:
                ids.append(row[0])
                rows.append([float(v) for v in row[1:]])
        return ids, np.array(rows, dtype=np.float64)

    # -- respondents --------------------------------------------------------

    def respondent_path(self, respondent):
        return os.path.join(self.respondents_dir, f"{respondent}.json")

    def list_respondents(self):
        if not os.path.isdir(self.respondents_dir):
            return []
        return sorted(name[:-5] for name in os.listdir(self.respondents_dir)
                      if name.endswith(".json"))

    def next_respondent_id(self):
        taken = set(self.list_respondents())
        n = len(taken) + 1
        while f"r{n:04d}" in taken:
            n += 1
        return f"r{n:04d}"

    def write_respondent(self, respondent, demographics, plan):
        doc = {"id": respondent,
               "demographics": dict(demographics or {}),
               "plan": {str(q): list(ids) for q, ids in sorted(plan.items())}}
        with open(self.respondent_path(respondent), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def read_respondent(self, respondent):
        path = self.respondent_path(respondent)
        if not os.path.exists(path):
            raise KeyError(respondent)
        with open(path) as fh:
            doc = json.load(fh)
        doc["plan"] = {int(q): list(ids) for q, ids in doc["plan"].items()}
        return doc

    # -- response journal ----------------------------------------------------

    def append_response(self, respondent, question, ranking):
        line = json.dumps({"respondent": respondent, "question": int(question),
                           "ranking": list(ranking)}, sort_keys=True)
        with open(self.responses_path, "a") as fh:
            fh.write(line + "\n")
            fh.flush()

    def read_responses(self):
        """Every complete journal line, in order; a torn final line is dropped."""
        if not os.path.exists(self.responses_path):
            return []
        with open(self.responses_path) as fh:
            text = fh.read()
        lines = text.split("\n")
        tail = lines.pop()  # "" when the file ends with a newline
        docs = []
        for n, line in enumerate(lines, start=1):
            try:
                docs.append(json.loads(line))
            except json.JSONDecodeError:
                raise StoreError(f"{self.responses_path}:{n}: corrupt journal line")
        if tail:
            try:
                docs.append(json.loads(tail))
            except json.JSONDecodeError:
                pass  # in-flight write lost to a crash
        return docs

    def latest_rankings(self, respondent):
        """question -> ranking tuple, resubmissions overwriting earlier lines."""
        rankings = {}
        for doc in self.read_responses():
            if doc.get("respondent") == respondent:
                rankings[int(doc["question"])] = tuple(doc["ranking"])
        return rankings

    def response_counts(self):
        counts = {}
        for doc in self.read_responses():
            seen = counts.setdefault(doc.get("respondent"), set())
            seen.add(int(doc["question"]))
        return {rid: len(qs) for rid, qs in counts.items()}

    # -- model artifacts ------------------------------------------------------

    def model_path(self, respondent):
        return os.path.join(self.models_dir, f"{respondent}.json")

    def ensemble_path(self, respondent):
        return os.path.join(self.ensembles_dir, f"{respondent}.json")

    def metrics_path(self, respondent):
        return os.path.join(self.models_dir, f"{respondent}.metrics.json")

    def trained_respondents(self):
        if not os.path.isdir(self.models_dir):
            return []
        return sorted(name[:-5] for name in os.listdir(self.models_dir)
                      if name.endswith(".json") and not name.endswith(".metrics.json")
                      and name != "population.json")
