"""Smart-card panel: synthetic generation, feature extraction, adopter taxonomy, scenarios and persistence."""
