# Command-line front end: experiment pipelines and their artifacts
