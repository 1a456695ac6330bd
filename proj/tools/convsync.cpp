#include "convsync/cli.hpp"

int main(int argc, char** argv) { return convsync::cli_main(argc, argv); }
