# Tests for solution files, CSV rows and JSON summaries
