"""Self and neighbor observation vectors."""
