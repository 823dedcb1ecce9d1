def propose_action(board: str) -> str:
  """Propose one of the best legal actions given the game board as text such that the final reward is maximized.

  Args:
      board (str): Game board as text.

  Returns:
      str: A string representing one of the best legal actions.

  Raises:
      Exception: If fail to propose any legal action.
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
