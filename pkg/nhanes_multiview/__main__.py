"""Module access point for nhanes_multiview."""

from __future__ import annotations

from nhanes_multiview.cli.nhanes_main import main

raise SystemExit(main())
