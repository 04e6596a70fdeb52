import sys
raise SystemExit(__import__("ftstab.cli", fromlist=["main"]).main())
