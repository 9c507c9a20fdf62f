"""28 GHz sidewalk measurement processing, path gain models and SCM tooling."""

__version__ = "0.1.0"
