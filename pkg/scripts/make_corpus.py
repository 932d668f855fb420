"""Regenerate the bundled ontology and synthetic relationship corpus."""

from pathlib import Path

from cosearch.synth import household_corpus, household_ontology, write_corpus, write_ontology

OUT = Path(__file__).resolve().parents[1] / "src" / "cosearch" / "data"

if __name__ == "__main__":
    write_ontology(household_ontology(), OUT / "ontology.tsv")
    write_corpus(household_corpus(seed=0), OUT / "corpus.tsv",
                 header="synthetic household relationship counts: subject predicate object count")
