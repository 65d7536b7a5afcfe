"""Knowledge-graph augmented textual entailment."""
