/* Uses one external helper (strcmp); the client rewrites the call
 * against the server-provided address map before compiling. */
int check_password(char *input) {
  char password[] = "topsecret123";
  return !strcmp(input, password);
}
