#include "tsrep/cli.hpp"

int main(int argc, char** argv) { return tsrep::cli_main(argc, argv); }
