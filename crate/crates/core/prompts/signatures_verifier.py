def propose_action(board: str) -> str:
  """Propose a valid random action given the game board as text

  Args:
      board (str): Game board as text.

  Returns:
      str: A valid random action as string.

  Raises:
      Exception: If fail to propose a valid random action.
  """
  raise NotImplementedError()

def is_legal_action(board: str, action: str) -> bool:
  """Check if an action string is valid given the game board as text

  Args:
      board (str): Game board as text.
      action (str): Input action as string.

  Returns:
      bool: If the input action string is valid.

  Raises:
      Exception: If fail to check if the action string is valid.
  """
  raise NotImplementedError()
