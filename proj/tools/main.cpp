#include "cnnbound/cli.hpp"

int main(int argc, char** argv) { return cnnbound::cli_dispatch(argc, argv); }
