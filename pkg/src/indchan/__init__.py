"""Universal coding over channels known only through their empirical behaviour."""
