from nsotree.cli import main

raise SystemExit(main())
