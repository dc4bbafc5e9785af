# agents package