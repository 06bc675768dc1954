"""Data Capsules: self-contained, policy-carrying encrypted containers."""
