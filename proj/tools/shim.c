/* Tiny shared library loaded by the collector as lib_small: its image is
 * far below 2MB, so it never lands on huge-folio alignment. */

int aslrkit_shim_marker(void) { return 42; }
