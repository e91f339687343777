"""Ward telemetry monitor: simulated vital-sign bracelets streaming a binary
protocol into a gateway that classifies readings against a physician-editable
rule base, persists a patient database, and routes and escalates alerts to
nurse and physician clients."""

__version__ = "0.1.0"
