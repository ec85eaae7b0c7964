from lipgram.cli import main
import sys
sys.exit(main())
