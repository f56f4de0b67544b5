#!/usr/bin/env python3
# A miniature end-to-end preference study: build a design pool, simulate a
# small survey population, train the three model families, and compare them
# on the held-out test questions. Everything is written to a temp directory.

import tempfile

from wheelpref import pipeline
from wheelpref.config import load_config
from wheelpref.store import Store

OVERRIDES = [
    "n_designs=120",
    "vae_epochs=6", "vae_patience=6",
    "n_respondents=6", "n_groups=2", "oracle_target=0.85",
    "augmentation_factor=1", "choice_epochs=8", "choice_patience=4",
    "k_neighbors=5", "alpha_epochs=80", "alpha_lr=0.3", "alpha_patience=80",
]


def main():
    cfg = load_config(None, OVERRIDES)
    with tempfile.TemporaryDirectory() as tmp:
        store = Store(tmp)

        print("generating", cfg["n_designs"], "designs ...")
        pipeline.generate(store, cfg)
        kept = pipeline.featurize(store, cfg)
        print("featurized", kept, "designs (any others failed the FE solve)")
        pipeline.pca_fit(store, cfg)
        print("training the VAE ...")
        pipeline.vae_train(store, cfg)

        print("simulating a", cfg["n_respondents"], "respondent survey ...")
        pipeline.survey_sim(store, cfg)
        pipeline.train_individual_cmd(store, cfg)
        pipeline.train_population_cmd(store, cfg)
        pipeline.train_ensemble_cmd(store, cfg)

        pipeline.eval_cmd(store, cfg)
        print("\nheld-out accuracy by method:")
        with open(store.eval_path) as fh:
            print(fh.read())

        rid = sorted(store.list_respondents())[0]
        doc = pipeline.recommend_cmd(store, cfg, rid, 5)
        print(f"top designs for {rid}:")
        for rank, (design, util) in enumerate(zip(doc["designs"], doc["utilities"]), 1):
            print(f"  {rank}. {design}  utility {util:+.3f}")


if __name__ == "__main__":
    main()
