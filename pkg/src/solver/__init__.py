# solver package