# Process settings and experiment config files for cavityecho
