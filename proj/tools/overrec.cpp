#include "overrec/cli.hpp"

int main(int argc, char** argv) { return overrec::run_cli(argc, argv); }
