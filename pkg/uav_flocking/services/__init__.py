# Orchestration facade used by the CLI
