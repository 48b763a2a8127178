# Logging, configuration, errors and expression parsing
