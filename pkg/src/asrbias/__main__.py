from asrbias.cli import main

main()
