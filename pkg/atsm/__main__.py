from atsm.main import main

main()
